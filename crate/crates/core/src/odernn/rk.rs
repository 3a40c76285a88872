use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Activation, Matrix};

use super::config::{OdeRnnConfig, Tableau};
use super::step::{FIXED_POINT_CAP, FIXED_POINT_DAMPING, FIXED_POINT_TOL};

/// Generalized Runge–Kutta scheme with matrix-valued coefficients:
///
/// `k_q = f(d_q·y + δ·Σ_j a_qj·k_j, t + c_q·δ)`, `y' = y + δ·Σ_i e_i·k_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RkScheme {
    pub a: Vec<Vec<Matrix>>,
    pub e: Vec<Matrix>,
    pub c: Vec<f64>,
    pub d: Vec<Matrix>,
    pub delta: f64,
}

impl RkScheme {
    pub fn from_tableau(tab: &Tableau, dim: usize, delta: f64) -> Self {
        let n = tab.stages();
        RkScheme {
            a: (0..n)
                .map(|q| (0..n).map(|j| Matrix::scaled_identity(dim, tab.a[q][j])).collect())
                .collect(),
            e: tab.b.iter().map(|&x| Matrix::scaled_identity(dim, x)).collect(),
            c: tab.c.clone(),
            d: (0..n).map(|_| Matrix::identity(dim)).collect(),
            delta,
        }
    }

    pub fn stages(&self) -> usize {
        self.e.len()
    }

    pub fn dim(&self) -> usize {
        self.e.first().map_or(0, Matrix::rows)
    }

    pub fn is_explicit(&self) -> bool {
        self.a.iter().enumerate().all(|(q, row)| row.iter().skip(q).all(Matrix::is_zero))
    }
}

/// Integrates `y' = f(y, t)` from `t = 0`; returns `steps + 1` states.
pub fn rk_integrate(scheme: &RkScheme, mut f: impl FnMut(&[f64], f64) -> Vec<f64>, y0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    let n = scheme.stages();
    let dim = y0.len();
    if scheme.dim() != dim {
        return Err(Error::dims("rk_integrate state", scheme.dim(), dim));
    }
    let explicit = scheme.is_explicit();
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(y0.to_vec());
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; dim]; n];
    let mut arg = vec![0.0; dim];
    for step in 0..steps {
        let t = step as f64 * scheme.delta;
        let stage = |q: usize, k: &[Vec<f64>], arg: &mut Vec<f64>, f: &mut dyn FnMut(&[f64], f64) -> Vec<f64>| -> Vec<f64> {
            arg.fill(0.0);
            scheme.d[q].matvec_add_into(&y, arg);
            for (j, kj) in k.iter().enumerate() {
                scheme.a[q][j].matvec_scaled_add_into(scheme.delta, kj, arg);
            }
            f(arg, t + scheme.c[q] * scheme.delta)
        };
        for kq in k.iter_mut() {
            kq.fill(0.0);
        }
        for q in 0..n {
            k[q] = stage(q, &k, &mut arg, &mut f);
        }
        if !explicit {
            let mut iterations = 0;
            let mut damping = 1.0;
            let mut previous = f64::INFINITY;
            loop {
                if iterations == FIXED_POINT_CAP {
                    let residual = f64::NAN;
                    return Err(Error::ImplicitNoConvergence { iterations, residual });
                }
                iterations += 1;
                let g: Vec<Vec<f64>> = (0..n).map(|q| stage(q, &k, &mut arg, &mut f)).collect();
                let mut residual: f64 = 0.0;
                let mut size: f64 = 1.0;
                for (kq, gq) in k.iter().zip(&g) {
                    for (a, b) in kq.iter().zip(gq) {
                        residual = residual.max((a - b).abs());
                        size = size.max(a.abs());
                    }
                }
                if !residual.is_finite() {
                    return Err(Error::ImplicitNoConvergence { iterations, residual });
                }
                if residual <= FIXED_POINT_TOL * size {
                    k = g;
                    break;
                }
                if residual >= previous {
                    damping = FIXED_POINT_DAMPING;
                }
                previous = residual;
                for (kq, gq) in k.iter_mut().zip(&g) {
                    for (a, b) in kq.iter_mut().zip(gq) {
                        *a = (1.0 - damping) * *a + damping * b;
                    }
                }
            }
        }
        for (ei, ki) in scheme.e.iter().zip(&k) {
            ei.matvec_scaled_add_into(scheme.delta, ki, &mut y);
        }
        traj.push(y.clone());
    }
    Ok(traj)
}

/// An ODERNN in pure-integrator form, rewritten as a scheme on the linear field
/// `f(y) = M·y + c` with `M = κ·W` and `c = κ·b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RkReduction {
    pub scheme: RkScheme,
    pub field: Matrix,
    pub offset: Vec<f64>,
}

impl RkReduction {
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.offset.clone();
        self.field.matvec_add_into(y, &mut out);
        out
    }

    pub fn integrate(&self, y0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
        rk_integrate(&self.scheme, |y, _| self.eval(y), y0, steps)
    }
}

/// Reads an ODERNN as a Runge–Kutta scheme, treating stage `k` as the `k`-th
/// integration stage. Requires identity activations, no delays, shared
/// `W_q, b_q, κ_q` over the stages, `γ_q = 0` for `q ≥ 2`, and the plain
/// output `Y_{l+1} = Y_l + h·Σ β_k K_k`.
pub fn odernn_as_rk(cfg: &OdeRnnConfig) -> Result<RkReduction> {
    cfg.validate()?;
    let n = cfg.n;
    let fail = |why: &str| Err(Error::NotReducible(why.to_string()));
    if cfg.activations.iter().any(|&a| a != Activation::Identity) {
        return fail("activations must all be the identity");
    }
    if cfg.inner.iter().any(Option::is_some) {
        return fail("composite activations are not linear-reducible");
    }
    if !cfg.gamma[n].is_identity() || !cfg.kappa[n].is_identity() {
        return fail("output scalings gamma_{n+1}, kappa_{n+1} must be the identity");
    }
    if !cfg.w[n].is_zero() || cfg.b[n].iter().any(|&x| x != 0.0) {
        return fail("output weight W_{n+1} and bias b_{n+1} must vanish");
    }
    if cfg.s != cfg.p {
        return fail("state and hidden dimensions must agree");
    }
    if n > 1 && cfg.delays()[n - 1] != 0 {
        return fail("stages must read the current state (t = 1)");
    }
    for q in 1..n {
        if !cfg.gamma[q].is_zero() {
            return fail("gamma_q must vanish for q >= 2");
        }
        if cfg.w[q] != cfg.w[0] || cfg.b[q] != cfg.b[0] || cfg.kappa[q] != cfg.kappa[0] {
            return fail("W_q, b_q and kappa_q must be shared by every stage");
        }
    }
    let kappa = &cfg.kappa[0];
    let field = kappa * &cfg.w[0];
    let offset = kappa.matvec(&cfg.b[0])?;
    let any_alpha = cfg.alpha.iter().flatten().any(|m| !m.is_zero());
    let a = if any_alpha {
        let mut a = Vec::with_capacity(n);
        for row in &cfg.alpha {
            let mut out = Vec::with_capacity(n);
            for alpha in row {
                let rhs = kappa * alpha;
                out.push(
                    field
                        .solve(&rhs)
                        .map_err(|_| Error::NotReducible("field matrix kappa*W is singular".into()))?,
                );
            }
            a.push(out);
        }
        a
    } else {
        vec![vec![Matrix::zeros(cfg.p, cfg.p); n]; n]
    };
    // Time nodes only matter for non-autonomous fields; use row sums of the scalar parts.
    let c = a
        .iter()
        .map(|row| row.iter().map(|m| m.as_scaled_identity().unwrap_or(0.0)).sum())
        .collect();
    Ok(RkReduction {
        scheme: RkScheme {
            a,
            e: cfg.beta.clone(),
            c,
            d: (0..n).map(|_| Matrix::identity(cfg.p)).collect(),
            delta: cfg.h,
        },
        field,
        offset,
    })
}

/// Least-squares slope of `log(error)` against `log(δ)`.
pub fn log_log_slope(deltas: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Global error at `t = 1` on `y' = −y, y(0) = 1` for each step size, and the
/// fitted convergence order.
pub fn convergence_order(tab: &Tableau, deltas: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut errors = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let steps = (1.0 / d).round() as usize;
        let scheme = RkScheme::from_tableau(tab, 1, d);
        let traj = rk_integrate(&scheme, |y, _| vec![-y[0]], &[1.0], steps)?;
        errors.push((traj[steps][0] - (-(steps as f64) * d).exp()).abs());
    }
    let slope = log_log_slope(deltas, &errors);
    Ok((errors, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odernn::odernn_rollout;

    #[test]
    fn zero_field_is_constant() {
        let scheme = RkScheme::from_tableau(&Tableau::rk4(), 2, 0.1);
        let traj = rk_integrate(&scheme, |y, _| vec![0.0; y.len()], &[1.0, -2.0], 5).unwrap();
        assert!(traj.iter().all(|y| y == &vec![1.0, -2.0]));
    }

    #[test]
    fn rk4_decay_to_one() {
        let scheme = RkScheme::from_tableau(&Tableau::rk4(), 1, 0.1);
        let traj = rk_integrate(&scheme, |y, _| vec![-y[0]], &[1.0], 10).unwrap();
        // One RK4 step on y' = −y multiplies by the degree-4 Taylor polynomial of e^{−δ}.
        let d: f64 = 0.1;
        let r = 1.0 - d + d * d / 2.0 - d.powi(3) / 6.0 + d.powi(4) / 24.0;
        assert!((traj[10][0] - r.powi(10)).abs() < 1e-15);
        let err = (traj[10][0] - (-1f64).exp()).abs();
        assert!(err < 3.4e-7 && err > 3.3e-7, "global error {err}");
    }

    #[test]
    fn orders_of_euler_and_rk4() {
        let deltas = [0.1, 0.05, 0.025];
        let (_, p4) = convergence_order(&Tableau::rk4(), &deltas).unwrap();
        let (_, p1) = convergence_order(&Tableau::explicit_euler(), &deltas).unwrap();
        assert!((p4 - 4.0).abs() <= 0.2, "rk4 slope {p4}");
        assert!((p1 - 1.0).abs() <= 0.2, "euler slope {p1}");
        let (_, p2) = convergence_order(&Tableau::gauss2(), &deltas).unwrap();
        assert!((p2 - 4.0).abs() <= 0.2, "gauss slope {p2}");
    }

    #[test]
    fn time_nodes_reach_the_field() {
        // y' = t: RK4 is exact for polynomials of low degree.
        let scheme = RkScheme::from_tableau(&Tableau::rk4(), 1, 0.25);
        let traj = rk_integrate(&scheme, |_, t| vec![t], &[0.0], 4).unwrap();
        assert!((traj[4][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn euler_config_reduces_to_euler() {
        let cfg = OdeRnnConfig::runge_kutta(&Tableau::explicit_euler(), &Matrix::identity(1), &[0.0], Activation::Identity, 0.1).unwrap();
        let r = odernn_as_rk(&cfg).unwrap();
        assert!(r.scheme.a[0][0].is_zero());
        assert_eq!(r.scheme.e[0].as_scaled_identity(), Some(1.0));
    }

    #[test]
    fn midpoint_config_reduces_to_midpoint() {
        let mut cfg = OdeRnnConfig::zeros(2, 1, 1, 1);
        cfg.h = 0.1;
        cfg.w[0] = Matrix::identity(1);
        cfg.w[1] = Matrix::identity(1);
        cfg.alpha[1][0] = Matrix::scaled_identity(1, 0.5);
        cfg.beta[1] = Matrix::identity(1);
        let r = odernn_as_rk(&cfg).unwrap();
        assert_eq!(r.scheme.a[1][0].as_scaled_identity(), Some(0.5));
        assert!(r.scheme.a[0][0].is_zero() && r.scheme.a[0][1].is_zero() && r.scheme.a[1][1].is_zero());
        assert_eq!(r.scheme.e[0].as_scaled_identity(), Some(0.0));
        assert_eq!(r.scheme.e[1].as_scaled_identity(), Some(1.0));
        let a = odernn_rollout(&cfg, &[1.0], 10).unwrap();
        let b = r.integrate(&[1.0], 10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn nonlinear_config_is_not_reducible() {
        let cfg = OdeRnnConfig::runge_kutta(&Tableau::explicit_euler(), &Matrix::identity(1), &[0.0], Activation::Tanh, 0.1).unwrap();
        assert!(matches!(odernn_as_rk(&cfg), Err(Error::NotReducible(_))));
    }
}

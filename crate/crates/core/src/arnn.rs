//! Recurrences with skew-symmetric weights: the symplectic Euler (1-ARNN) and
//! implicit midpoint (2-ARNN) updates, the spectral step bound and
//! reversibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, symmetry_tolerance, vector, Activation, CMatrix, Matrix, C64};
use crate::odernn::{InputHistory, OdeRnnConfig, Padding};

/// Skew-symmetric matrix with `W_ij = params[idx]`, `W_ji = −params[idx]` for
/// `i < j`, enumerated row by row.
pub fn make_skew(params: &[f64], dim: usize) -> Result<Matrix> {
    let expected = dim * dim.saturating_sub(1) / 2;
    if params.len() != expected {
        return Err(Error::dims("skew parameters", expected, params.len()));
    }
    let mut w = Matrix::zeros(dim, dim);
    let mut idx = 0;
    for i in 0..dim {
        for j in i + 1..dim {
            w.set(i, j, params[idx]);
            w.set(j, i, -params[idx]);
            idx += 1;
        }
    }
    Ok(w)
}

/// Inverse of [`make_skew`] on the strictly upper triangle.
pub fn skew_params(w: &Matrix) -> Vec<f64> {
    let n = w.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(w.get(i, j));
        }
    }
    out
}

fn check_skew(w: &Matrix) -> Result<()> {
    if !w.is_square() {
        return Err(Error::dims("skew weight (square)", w.rows(), w.cols()));
    }
    let r = w.skew_residual();
    if r > symmetry_tolerance(w.max_abs()) {
        return Err(Error::NotSkew(r));
    }
    Ok(())
}

/// Eigenvalues of a real skew matrix, computed from the Hermitian matrix `i·W`
/// (whose eigenvalue `μ` corresponds to `λ = −i·μ`), ordered by imaginary part.
pub fn skew_spectrum(w: &Matrix) -> Result<Vec<C64>> {
    check_skew(w)?;
    let iw = CMatrix::from_fn(w.rows(), w.cols(), |r, c| C64::new(0.0, w.get(r, c)));
    let mut out: Vec<C64> = eig_hermitian(&iw)?.values.into_iter().map(|mu| C64::new(0.0, -mu)).collect();
    out.sort_by(|a, b| a.im.total_cmp(&b.im));
    Ok(out)
}

/// `h·max|λ(W)| < 1`.
pub fn spectral_step_bound(w: &Matrix, h: f64) -> Result<bool> {
    let rho = skew_spectrum(w)?.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok((h * rho).abs() < 1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArnnIntegrator {
    #[default]
    SymplecticEuler,
    Midpoint,
}

/// A single-weight ARNN: `W = make_skew(skew_params, dim)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArnnConfig {
    pub dim: usize,
    pub skew_params: Vec<f64>,
    pub bias: Vec<f64>,
    pub h: f64,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub integrator: ArnnIntegrator,
}

impl ArnnConfig {
    pub fn new(w: &Matrix, bias: Vec<f64>, h: f64, activation: Activation, integrator: ArnnIntegrator) -> Result<Self> {
        check_skew(w)?;
        let cfg = ArnnConfig {
            dim: w.rows(),
            skew_params: skew_params(w),
            bias,
            h,
            activation,
            integrator,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn weight(&self) -> Result<Matrix> {
        make_skew(&self.skew_params, self.dim)
    }

    pub fn validate(&self) -> Result<()> {
        self.weight()?;
        if self.bias.len() != self.dim {
            return Err(Error::dims("arnn bias", self.dim, self.bias.len()));
        }
        Ok(())
    }

    /// The midpoint update as a one-stage ODERNN: `K = σ(W·Y + b + h·(W/2)·K)`,
    /// `Y' = Y + h·K`.
    pub fn to_odernn(&self) -> Result<OdeRnnConfig> {
        let w = self.weight()?;
        let d = self.dim;
        let mut cfg = OdeRnnConfig::zeros(1, 1, d, d);
        cfg.h = self.h;
        cfg.w[0] = w.clone();
        cfg.b[0] = self.bias.clone();
        cfg.alpha[0][0] = w.scale(0.5);
        cfg.beta[0] = Matrix::identity(d);
        cfg.activations[0] = self.activation;
        Ok(cfg)
    }

    pub fn step_bound_holds(&self) -> Result<bool> {
        spectral_step_bound(&self.weight()?, self.h)
    }
}

/// Symplectic Euler on the pair `(Y, Z)`:
/// `Z' = Z − h·σ(Wᵀ·Y + b)`, `Y' = Y + h·σ(W·Z' + b)`.
pub fn arnn_step_1_2(cfg: &ArnnConfig, y: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = cfg.weight()?;
    check_state(cfg, y)?;
    check_state(cfg, z)?;
    let mut u = cfg.bias.clone();
    w.transpose().matvec_add_into(y, &mut u);
    cfg.activation.apply_in_place(&mut u);
    let z1: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - cfg.h * b).collect();
    let mut v = cfg.bias.clone();
    w.matvec_add_into(&z1, &mut v);
    cfg.activation.apply_in_place(&mut v);
    let y1 = y.iter().zip(&v).map(|(a, b)| a + cfg.h * b).collect();
    Ok((y1, z1))
}

/// Exact inverse of [`arnn_step_1_2`].
pub fn arnn_step_1_2_inverse(cfg: &ArnnConfig, y1: &[f64], z1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = cfg.weight()?;
    check_state(cfg, y1)?;
    check_state(cfg, z1)?;
    let mut v = cfg.bias.clone();
    w.matvec_add_into(z1, &mut v);
    cfg.activation.apply_in_place(&mut v);
    let y: Vec<f64> = y1.iter().zip(&v).map(|(a, b)| a - cfg.h * b).collect();
    let mut u = cfg.bias.clone();
    w.transpose().matvec_add_into(&y, &mut u);
    cfg.activation.apply_in_place(&mut u);
    let z = z1.iter().zip(&u).map(|(a, b)| a + cfg.h * b).collect();
    Ok((y, z))
}

fn check_state(cfg: &ArnnConfig, v: &[f64]) -> Result<()> {
    if v.len() != cfg.dim {
        return Err(Error::dims("arnn state", cfg.dim, v.len()));
    }
    Ok(())
}

fn midpoint_with_step(cfg: &ArnnConfig, y: &[f64], h: f64) -> Result<Vec<f64>> {
    check_state(cfg, y)?;
    let mut ode = cfg.to_odernn()?;
    ode.h = h;
    let mut hist = InputHistory::new(1, cfg.dim, Padding::Zero);
    hist.push(y);
    Ok(crate::odernn::odernn_step(&ode, &hist)?.y_next)
}

/// Implicit midpoint `Y' = Y + h·σ(W·(Y + Y')/2 + b)`, solved by damped fixed point.
pub fn arnn_step_2_2(cfg: &ArnnConfig, y: &[f64]) -> Result<Vec<f64>> {
    midpoint_with_step(cfg, y, cfg.h)
}

/// Inverse of [`arnn_step_2_2`]: the midpoint rule is symmetric, so `Y` solves
/// the forward rule from `Y'` with step `−h`.
pub fn arnn_step_2_2_inverse(cfg: &ArnnConfig, y1: &[f64]) -> Result<Vec<f64>> {
    midpoint_with_step(cfg, y1, -cfg.h)
}

/// The quadratic form `‖Y‖² + ‖Z‖² − h·Yᵀ·W·Z`, conserved exactly by the linear
/// symplectic Euler update with skew `W` and positive definite when `h·‖W‖₂ < 2`.
pub fn symplectic_invariant(w: &Matrix, h: f64, y: &[f64], z: &[f64]) -> f64 {
    let wz = w.matvec(z).expect("dimension checked by caller");
    vector::dot(y, y) + vector::dot(z, z) - h * vector::dot(y, &wz)
}

/// Applies `step` `steps` times, then `inverse` as often, and returns the
/// Euclidean distance between the recovered and the original state.
pub fn reversibility_check(
    mut step: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut inverse: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    state: &[f64],
    steps: usize,
) -> Result<f64> {
    let mut x = state.to_vec();
    for _ in 0..steps {
        x = step(&x)?;
    }
    for _ in 0..steps {
        x = inverse(&x)?;
    }
    Ok(vector::dist(&x, state))
}

/// Reversibility of the integrator configured in `cfg`; for symplectic Euler
/// the state is `Y ‖ Z`.
pub fn arnn_reversibility(cfg: &ArnnConfig, state: &[f64], steps: usize) -> Result<f64> {
    let d = cfg.dim;
    match cfg.integrator {
        ArnnIntegrator::Midpoint => reversibility_check(|y| arnn_step_2_2(cfg, y), |y| arnn_step_2_2_inverse(cfg, y), state, steps),
        ArnnIntegrator::SymplecticEuler => {
            if state.len() != 2 * d {
                return Err(Error::dims("arnn state (Y, Z)", 2 * d, state.len()));
            }
            let fwd = |s: &[f64]| {
                let (y, z) = arnn_step_1_2(cfg, &s[..d], &s[d..])?;
                Ok(vector::concat(&[&y, &z]))
            };
            let back = |s: &[f64]| {
                let (y, z) = arnn_step_1_2_inverse(cfg, &s[..d], &s[d..])?;
                Ok(vector::concat(&[&y, &z]))
            };
            reversibility_check(fwd, back, state, steps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_vec, random_skew, rng_from_seed};
    use proptest::prelude::*;

    fn rot() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn make_skew_examples() {
        assert_eq!(make_skew(&[1.0], 2).unwrap(), rot());
        assert!(make_skew(&[0.0; 3], 3).unwrap().is_zero());
        assert!(matches!(make_skew(&[1.0, 2.0], 3), Err(Error::DimMismatch { .. })));
        let spec = skew_spectrum(&rot()).unwrap();
        assert!((spec[0] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((spec[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn spectral_bound_examples() {
        assert!(spectral_step_bound(&rot(), 0.5).unwrap());
        assert!(!spectral_step_bound(&rot(), 2.0).unwrap());
        assert!(spectral_step_bound(&Matrix::zeros(3, 3), 1e6).unwrap());
        assert!(matches!(spectral_step_bound(&Matrix::identity(2), 0.1), Err(Error::NotSkew(_))));
    }

    #[test]
    fn zero_weights_keep_state() {
        let cfg = ArnnConfig::new(
            &Matrix::zeros(2, 2),
            vec![0.0; 2],
            0.3,
            Activation::Tanh,
            ArnnIntegrator::SymplecticEuler,
        )
        .unwrap();
        let (y, z) = arnn_step_1_2(&cfg, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!((y, z), (vec![1.0, 2.0], vec![3.0, 4.0]));
        assert_eq!(arnn_step_2_2(&cfg, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let biased = ArnnConfig::new(
            &Matrix::zeros(2, 2),
            vec![0.5, -0.5],
            0.3,
            Activation::Tanh,
            ArnnIntegrator::Midpoint,
        )
        .unwrap();
        let y = arnn_step_2_2(&biased, &[1.0, 2.0]).unwrap();
        assert!((y[0] - (1.0 + 0.3 * 0.5f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn symplectic_invariant_is_conserved_under_the_bound() {
        let cfg = ArnnConfig::new(&rot(), vec![0.0; 2], 0.5, Activation::Identity, ArnnIntegrator::SymplecticEuler).unwrap();
        assert!(cfg.step_bound_holds().unwrap());
        let w = cfg.weight().unwrap();
        let (mut y, mut z) = (vec![1.0, 0.0], vec![0.0, 0.5]);
        let e0 = symplectic_invariant(&w, cfg.h, &y, &z);
        let n0 = vector::norm(&vector::concat(&[&y, &z]));
        // ‖(Y, Z)‖² ∈ E·[1/(1 + hρ/2), 1/(1 − hρ/2)]
        let band = ((1.0 + 0.25) / (1.0 - 0.25f64)).sqrt();
        for _ in 0..10_000 {
            let (y1, z1) = arnn_step_1_2(&cfg, &y, &z).unwrap();
            y = y1;
            z = z1;
            assert!((symplectic_invariant(&w, cfg.h, &y, &z) - e0).abs() <= 1e-6 * e0);
            let nn = vector::norm(&vector::concat(&[&y, &z]));
            assert!(nn <= band * n0 * (1.0 + 1e-9) && nn >= n0 / band * (1.0 - 1e-9));
        }
    }

    #[test]
    fn symplectic_euler_explodes_past_the_limit() {
        let cfg = ArnnConfig::new(&rot(), vec![0.0; 2], 2.5, Activation::Identity, ArnnIntegrator::SymplecticEuler).unwrap();
        let (mut y, mut z) = (vec![1.0, 0.0], vec![0.0, 0.0]);
        let n0 = 1.0;
        let mut exceeded = false;
        for _ in 0..100 {
            let (y1, z1) = arnn_step_1_2(&cfg, &y, &z).unwrap();
            y = y1;
            z = z1;
            if vector::norm(&vector::concat(&[&y, &z])) > 10.0 * n0 {
                exceeded = true;
                break;
            }
        }
        assert!(exceeded);
    }

    #[test]
    fn midpoint_is_cayley_and_reversible() {
        let mut rng = rng_from_seed(31);
        let w = random_skew(&mut rng, 6);
        let rho = skew_spectrum(&w).unwrap().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let h = 0.9 / rho;
        let cfg = ArnnConfig::new(&w, vec![0.0; 6], h, Activation::Identity, ArnnIntegrator::Midpoint).unwrap();
        assert!(cfg.step_bound_holds().unwrap());
        let mut y = gaussian_vec(&mut rng, 6);
        for _ in 0..50 {
            let y1 = arnn_step_2_2(&cfg, &y).unwrap();
            assert!((vector::norm(&y1) - vector::norm(&y)).abs() <= 1e-10 * vector::norm(&y));
            y = y1;
        }
        assert!(arnn_reversibility(&cfg, &y, 100).unwrap() <= 1e-8);
        assert_eq!(arnn_reversibility(&cfg, &y, 0).unwrap(), 0.0);
    }

    #[test]
    fn tanh_midpoint_reverses_when_solver_converges() {
        let mut rng = rng_from_seed(32);
        let w = random_skew(&mut rng, 4);
        let rho = skew_spectrum(&w).unwrap().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let cfg = ArnnConfig::new(&w, gaussian_vec(&mut rng, 4), 0.5 / rho, Activation::Tanh, ArnnIntegrator::Midpoint).unwrap();
        assert!(arnn_reversibility(&cfg, &gaussian_vec(&mut rng, 4), 100).unwrap() <= 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn skew_quadratic_form_vanishes(seed in any::<u64>(), dim in 1usize..9) {
            let mut rng = rng_from_seed(seed);
            let params = gaussian_vec(&mut rng, dim * (dim - 1) / 2);
            let w = make_skew(&params, dim).unwrap();
            let x = gaussian_vec(&mut rng, dim);
            let q = vector::dot(&x, &w.matvec(&x).unwrap());
            prop_assert!(q.abs() <= 1e-12 * vector::dot(&x, &x).max(1.0));
            prop_assert_eq!(skew_params(&w), params);
        }

        #[test]
        fn bound_is_scale_consistent(seed in any::<u64>(), dim in 2usize..6, h in 0.01f64..3.0, c in 0.1f64..10.0) {
            let mut rng = rng_from_seed(seed);
            let w = random_skew(&mut rng, dim);
            let rho = skew_spectrum(&w).unwrap().iter().fold(0.0f64, |m, z| m.max(z.norm()));
            // Stay away from the boundary where rounding could flip either side.
            prop_assume!(((h * rho) - 1.0).abs() > 1e-9);
            prop_assert_eq!(spectral_step_bound(&w, h).unwrap(), spectral_step_bound(&w.scale(c), h / c).unwrap());
        }

        #[test]
        fn both_integrators_reverse_under_the_bound(seed in any::<u64>(), dim in 1usize..9, frac in 0.05f64..0.95) {
            let mut rng = rng_from_seed(seed);
            let w = random_skew(&mut rng, dim);
            let rho = skew_spectrum(&w).unwrap().iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-3);
            let h = frac / rho;
            let mid = ArnnConfig::new(&w, vec![0.0; dim], h, Activation::Identity, ArnnIntegrator::Midpoint).unwrap();
            prop_assert!(arnn_reversibility(&mid, &gaussian_vec(&mut rng, dim), 100).unwrap() <= 1e-8);
            let se = ArnnConfig { integrator: ArnnIntegrator::SymplecticEuler, ..mid };
            prop_assert!(arnn_reversibility(&se, &gaussian_vec(&mut rng, 2 * dim), 100).unwrap() <= 1e-8);
        }
    }
}

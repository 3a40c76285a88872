use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kron, Activation, Matrix};

use super::history::Padding;

/// How the step obtains its weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Static,
    /// Weights are rewritten every step by a [`super::WeightSchedule`]; `source`
    /// names the architecture that produced the config.
    Dynamical { source: String },
}

/// Full parameter set of an n-t-ODERNN.
///
/// Stage `q` (1-based) reads `Y_{l − t_{q−1}}` with `t_k = ⌊t·k/n⌋`; the output
/// reads `Y_{l − t_{n−1}}`. Indices in the vectors below are 0-based, so
/// `w[q − 1]` is `W_q` and `w[n]` is `W_{n+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeRnnConfig {
    pub n: usize,
    pub t: usize,
    pub s: usize,
    pub p: usize,
    pub h: f64,
    /// `W_1..W_n` are p×s, `W_{n+1}` is s×s.
    pub w: Vec<Matrix>,
    /// `b_1..b_n` have length p, `b_{n+1}` length s.
    pub b: Vec<Vec<f64>>,
    /// `alpha[q][k]` is the p×p block `α_{q+1,k+1}`.
    pub alpha: Vec<Vec<Matrix>>,
    /// `β_1..β_n`, each s×p.
    pub beta: Vec<Matrix>,
    /// `γ_1..γ_{n+1}`; `γ_1` is unused, `γ_{n+1}` is s×s.
    pub gamma: Vec<Matrix>,
    /// `κ_1..κ_{n+1}`; `κ_{n+1}` is s×s.
    pub kappa: Vec<Matrix>,
    /// `σ_1..σ_{n+1}`.
    pub activations: Vec<Activation>,
    /// Optional p×p map applied inside `σ_q`, giving the composite activation
    /// `u ↦ σ_q(P_q·u)` for stages `1..n`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner: Vec<Option<Matrix>>,
    #[serde(default)]
    pub padding: Padding,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

/// Scalar Butcher tableau `(a, b, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn explicit_euler() -> Self {
        Tableau {
            a: vec![vec![0.0]],
            b: vec![1.0],
            c: vec![0.0],
        }
    }

    pub fn implicit_midpoint() -> Self {
        Tableau {
            a: vec![vec![0.5]],
            b: vec![1.0],
            c: vec![0.5],
        }
    }

    /// Explicit midpoint: `a_21 = 1/2`, weights `(0, 1)`.
    pub fn explicit_midpoint() -> Self {
        Tableau {
            a: vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
        }
    }

    pub fn rk4() -> Self {
        Tableau {
            a: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
        }
    }

    /// Two-stage Gauss–Legendre (order 4, algebraically stable).
    pub fn gauss2() -> Self {
        let r = 3f64.sqrt() / 6.0;
        Tableau {
            a: vec![vec![0.25, 0.25 - r], vec![0.25 + r, 0.25]],
            b: vec![0.5, 0.5],
            c: vec![0.5 - r, 0.5 + r],
        }
    }

    pub fn is_explicit(&self) -> bool {
        self.a.iter().enumerate().all(|(q, row)| row.iter().skip(q).all(|&x| x == 0.0))
    }
}

/// `t_k = ⌊t·k/n⌋` for `k = 0..=n`.
pub fn delay_schedule(n: usize, t: usize) -> Vec<usize> {
    (0..=n).map(|k| t * k / n).collect()
}

impl OdeRnnConfig {
    /// All weights, biases, α, β and γ zero, except `γ_{n+1} = I`; every κ is the
    /// identity and every activation is the identity.
    pub fn zeros(n: usize, t: usize, s: usize, p: usize) -> Self {
        let mut gamma: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(p, p)).collect();
        gamma.push(Matrix::identity(s));
        let mut kappa: Vec<Matrix> = (0..n).map(|_| Matrix::identity(p)).collect();
        kappa.push(Matrix::identity(s));
        let mut w: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(p, s)).collect();
        w.push(Matrix::zeros(s, s));
        let mut b: Vec<Vec<f64>> = (0..n).map(|_| vec![0.0; p]).collect();
        b.push(vec![0.0; s]);
        OdeRnnConfig {
            n,
            t,
            s,
            p,
            h: 1.0,
            w,
            b,
            alpha: (0..n).map(|_| (0..n).map(|_| Matrix::zeros(p, p)).collect()).collect(),
            beta: (0..n).map(|_| Matrix::zeros(s, p)).collect(),
            gamma,
            kappa,
            activations: vec![Activation::Identity; n + 1],
            inner: Vec::new(),
            padding: Padding::Zero,
            weight_mode: WeightMode::Static,
        }
    }

    /// Runge–Kutta integrator of the field `y ↦ F·σ(y + bias)` written as an ODERNN:
    /// `W_q = I`, `κ_q = F`, `α = a ⊗ I`, `β = b ⊗ I`, `Y_{l+1} = Y_l + h·Σ β_k K_k`.
    pub fn runge_kutta(tableau: &Tableau, field: &Matrix, bias: &[f64], sigma: Activation, h: f64) -> Result<Self> {
        let n = tableau.stages();
        let p = field.rows();
        if !field.is_square() {
            return Err(Error::dims("runge_kutta field (square)", p, field.cols()));
        }
        if bias.len() != p {
            return Err(Error::dims("runge_kutta bias", p, bias.len()));
        }
        let mut cfg = OdeRnnConfig::zeros(n, 1, p, p);
        cfg.h = h;
        let eye = Matrix::identity(p);
        for q in 0..n {
            cfg.w[q] = eye.clone();
            cfg.b[q] = bias.to_vec();
            cfg.kappa[q] = field.clone();
            cfg.activations[q] = sigma;
            cfg.beta[q] = Matrix::scaled_identity(p, tableau.b[q]);
            for k in 0..n {
                cfg.alpha[q][k] = kron(&Matrix::scaled_identity(1, tableau.a[q][k]), &eye);
            }
        }
        Ok(cfg)
    }

    pub fn delays(&self) -> Vec<usize> {
        delay_schedule(self.n, self.t)
    }

    /// Delay used by stage `q` (1-based) and, for `q = n + 1`, by the output.
    pub fn stage_delay(&self, q: usize) -> usize {
        let d = self.delays();
        if q == self.n + 1 {
            d[self.n - 1]
        } else {
            d[q - 1]
        }
    }

    pub fn is_explicit(&self) -> bool {
        self.alpha
            .iter()
            .enumerate()
            .all(|(q, row)| row.iter().skip(q).all(Matrix::is_zero))
    }

    pub fn inner_map(&self, q: usize) -> Option<&Matrix> {
        self.inner.get(q).and_then(Option::as_ref)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, s, p) = (self.n, self.s, self.p);
        if n == 0 || self.t == 0 {
            return Err(Error::InvalidConfig("n and t must be at least 1".into()));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidConfig("step h must be finite".into()));
        }
        let count = |ctx: &'static str, expected: usize, actual: usize| -> Result<()> {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::dims(ctx, expected, actual))
            }
        };
        count("w count", n + 1, self.w.len())?;
        count("b count", n + 1, self.b.len())?;
        count("alpha rows", n, self.alpha.len())?;
        count("beta count", n, self.beta.len())?;
        count("gamma count", n + 1, self.gamma.len())?;
        count("kappa count", n + 1, self.kappa.len())?;
        count("activation count", n + 1, self.activations.len())?;
        let shape = |ctx: &'static str, m: &Matrix, r: usize, c: usize| -> Result<()> {
            if m.shape() == (r, c) {
                Ok(())
            } else {
                Err(Error::dims(ctx, format!("{r}x{c}"), format!("{}x{}", m.rows(), m.cols())))
            }
        };
        for q in 0..n {
            shape("W_q", &self.w[q], p, s)?;
            count("b_q", p, self.b[q].len())?;
            shape("gamma_q", &self.gamma[q], p, p)?;
            shape("kappa_q", &self.kappa[q], p, p)?;
            shape("beta_k", &self.beta[q], s, p)?;
            count("alpha columns", n, self.alpha[q].len())?;
            for a in &self.alpha[q] {
                shape("alpha_qk", a, p, p)?;
            }
        }
        shape("W_{n+1}", &self.w[n], s, s)?;
        count("b_{n+1}", s, self.b[n].len())?;
        shape("gamma_{n+1}", &self.gamma[n], s, s)?;
        shape("kappa_{n+1}", &self.kappa[n], s, s)?;
        if !self.inner.is_empty() {
            count("inner count", n, self.inner.len())?;
            for m in self.inner.iter().flatten() {
                shape("inner map", m, p, p)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delay_examples() {
        assert_eq!(delay_schedule(2, 2), vec![0, 1, 2]);
        assert_eq!(delay_schedule(4, 4), vec![0, 1, 2, 3, 4]);
        assert_eq!(delay_schedule(3, 1), vec![0, 0, 0, 1]);
    }

    #[test]
    fn tableau_explicitness() {
        assert!(Tableau::rk4().is_explicit());
        assert!(Tableau::explicit_euler().is_explicit());
        assert!(!Tableau::implicit_midpoint().is_explicit());
        assert!(!Tableau::gauss2().is_explicit());
    }

    #[test]
    fn json_round_trip() {
        let cfg = OdeRnnConfig::runge_kutta(
            &Tableau::gauss2(),
            &Matrix::scaled_identity(2, -1.0),
            &[0.0, 0.1],
            Activation::Tanh,
            0.1,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: OdeRnnConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        back.validate().unwrap();
        assert!(!back.is_explicit());
    }

    #[test]
    fn validation_reports_dimension_errors() {
        let mut cfg = OdeRnnConfig::zeros(2, 2, 3, 2);
        cfg.validate().unwrap();
        cfg.beta[1] = Matrix::zeros(2, 2);
        assert!(matches!(cfg.validate(), Err(Error::DimMismatch { .. })));
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_and_ends_at_t(n in 1usize..12, t in 1usize..12) {
            let d = delay_schedule(n, t);
            prop_assert_eq!(d[0], 0);
            prop_assert_eq!(d[n], t);
            for k in 1..=n {
                prop_assert_eq!(d[k], (t * k) / n);
                prop_assert!(d[k - 1] <= d[k]);
            }
            prop_assert!(d[n - 1] < t);
        }
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, check_shape};
use crate::error::{Error, Result};
use crate::numerics::{cayley, random::gaussian_matrix, random::random_skew, Activation, Matrix};
use crate::odernn::{InputHistory, OdeRnnConfig, WeightMode, WeightSchedule};

/// Largest `‖WᵀW − I‖_max` accepted as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// One URNN layer: `K^l = σ(W_l·K^{l−1} + V_l·x_t)` with `W_l = Cayley(A_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrnnLayer {
    /// Skew-symmetric generator `A_l`.
    pub a: Matrix,
    pub v: Matrix,
}

/// Stacked URNN. The first layer reads the top layer's previous value,
/// `K_t^0 = K_{t−1}^L`, so one layer is the usual `σ(W·K_{t−1} + V·x_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrnnSpec {
    pub dim: usize,
    pub layers: Vec<UrnnLayer>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl UrnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.dim == 0 {
            return Err(Error::InvalidConfig("urnn needs at least one layer and dim >= 1".into()));
        }
        for layer in &self.layers {
            check_shape("urnn A", &layer.a, self.dim, self.dim)?;
            check_shape("urnn V", &layer.v, self.dim, self.dim)?;
            let r = layer.a.skew_residual();
            if r > 1e-12 * layer.a.max_abs().max(1.0) {
                return Err(Error::NotSkew(r));
            }
        }
        Ok(())
    }

    /// Realized recurrent weights `Cayley(A_l)`, checked for orthogonality.
    pub fn weights(&self) -> Result<Vec<Matrix>> {
        self.layers.iter().map(|l| orthogonal_weight(&l.a)).collect()
    }
}

fn orthogonal_weight(a: &Matrix) -> Result<Matrix> {
    let w = cayley(a)?;
    let res = w.transpose().try_matmul(&w)?.max_abs_diff(&Matrix::identity(w.rows()));
    if res > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal(res));
    }
    Ok(w)
}

/// `σ(W·K^{l−1} + V·x)` for a given recurrent weight `w`.
fn urnn_apply(w: &Matrix, v: &Matrix, sigma: Activation, k_prev_layer: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut pre = w.matvec(k_prev_layer)?;
    v.matvec_add_into(x, &mut pre);
    sigma.apply_in_place(&mut pre);
    Ok(pre)
}

pub fn urnn_step(spec: &UrnnSpec, l: usize, k_prev_layer: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let layer = spec.layers.get(l).ok_or(Error::OutOfRange {
        index: l,
        max: spec.layers.len(),
    })?;
    check_len("urnn K^{l-1}", k_prev_layer, spec.dim)?;
    check_len("urnn x", x, spec.dim)?;
    urnn_apply(&orthogonal_weight(&layer.a)?, &layer.v, spec.activation, k_prev_layer, x)
}

pub fn urnn_run(spec: &UrnnSpec, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let weights = spec.weights()?;
    let mut top = vec![0.0; spec.dim];
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        check_len("urnn x", x, spec.dim)?;
        for (layer, w) in spec.layers.iter().zip(&weights) {
            top = urnn_apply(w, &layer.v, spec.activation, &top, x)?;
        }
        out.push(top.clone());
    }
    Ok(out)
}

pub fn random_urnn(rng: &mut impl Rng, layers: usize, dim: usize) -> Result<UrnnSpec> {
    let scale = 1.0 / (dim as f64).sqrt();
    let layers = (0..layers)
        .map(|_| UrnnLayer {
            a: random_skew(rng, dim).scale(scale),
            v: gaussian_matrix(rng, dim, dim).scale(scale),
        })
        .collect();
    let spec = UrnnSpec {
        dim,
        layers,
        activation: Activation::Tanh,
    };
    spec.validate()?;
    Ok(spec)
}

/// Stage `l` is layer `l`: `σ(V_l·x + h·α·K_{l−1})` with `h·α = W_l`, except
/// stage 0 which receives `W_1·K_{t−1}^L` through its bias. `n = L`, `t = 1`.
#[derive(Clone, Debug)]
pub struct UrnnSchedule {
    w_first: Matrix,
    top_prev: Vec<f64>,
}

impl WeightSchedule for UrnnSchedule {
    fn prepare(&mut self, _step: usize, _hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()> {
        params.b[0] = self.w_first.matvec(&self.top_prev)?;
        Ok(())
    }

    fn observe(&mut self, _hiddens: &[Vec<f64>], y_next: &[f64]) {
        self.top_prev = y_next.to_vec();
    }

    fn reset(&mut self) {
        self.top_prev.fill(0.0);
    }
}

pub(super) fn map(spec: &UrnnSpec) -> Result<(OdeRnnConfig, UrnnSchedule)> {
    let (n, depth) = (spec.dim, spec.layers.len());
    let weights = spec.weights()?;
    let mut cfg = OdeRnnConfig::zeros(depth, 1, n, n);
    cfg.h = 1.0;
    for (l, layer) in spec.layers.iter().enumerate() {
        cfg.w[l] = layer.v.clone();
        cfg.activations[l] = spec.activation;
        if l > 0 {
            cfg.alpha[l][l - 1] = weights[l].scale(1.0 / cfg.h);
        }
    }
    cfg.gamma[depth] = Matrix::zeros(n, n);
    cfg.beta[depth - 1] = Matrix::scaled_identity(n, 1.0 / cfg.h);
    cfg.weight_mode = WeightMode::Dynamical { source: "urnn".into() };
    let sched = UrnnSchedule {
        w_first: weights[0].clone(),
        top_prev: vec![0.0; n],
    };
    Ok((cfg, sched))
}

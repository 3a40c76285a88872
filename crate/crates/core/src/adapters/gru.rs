use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, check_shape};
use crate::error::{Error, Result};
use crate::numerics::{diag_embed, random::gaussian_matrix, random::random_orthogonal, vector, Activation, Matrix};
use crate::odernn::{InputHistory, OdeRnnConfig, WeightMode, WeightSchedule};

/// One GRU layer: `(r, z) = σ(W·[K^{l−1}; K_{t−1}] + b)` with `W` of shape
/// 2n×2n, then `K_t = (1 − z)∘K_{t−1} + z∘tanh(W_x·K^{l−1} + W_g·(r∘K_{t−1}))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub w: Matrix,
    pub w_x: Matrix,
    pub w_g: Matrix,
    /// Optional gate bias of length 2n (rows `r` then `z`).
    #[serde(default)]
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruSpec {
    pub dim: usize,
    pub layers: Vec<GruLayer>,
    #[serde(default = "default_gate")]
    pub gate_activation: Activation,
}

fn default_gate() -> Activation {
    Activation::Sigmoid
}

impl GruSpec {
    pub fn new(dim: usize, layers: Vec<GruLayer>) -> Self {
        GruSpec {
            dim,
            layers,
            gate_activation: Activation::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.dim == 0 {
            return Err(Error::InvalidConfig("gru needs at least one layer and dim >= 1".into()));
        }
        let n = self.dim;
        for layer in &self.layers {
            check_shape("gru W", &layer.w, 2 * n, 2 * n)?;
            check_shape("gru W_x", &layer.w_x, n, n)?;
            check_shape("gru W_g", &layer.w_g, n, n)?;
            if !layer.b.is_empty() {
                check_len("gru bias", &layer.b, 2 * n)?;
            }
        }
        Ok(())
    }
}

/// Reset and update gates `(r, z)` of layer `l`.
pub fn gru_gates(spec: &GruSpec, l: usize, k_prev_time: &[f64], k_prev_layer: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.dim;
    let layer = spec.layers.get(l).ok_or(Error::OutOfRange {
        index: l,
        max: spec.layers.len(),
    })?;
    check_len("gru K_{t-1}", k_prev_time, n)?;
    check_len("gru K^{l-1}", k_prev_layer, n)?;
    let mut a = if layer.b.is_empty() { vec![0.0; 2 * n] } else { layer.b.clone() };
    layer.w.matvec_add_into(&vector::concat(&[k_prev_layer, k_prev_time]), &mut a);
    spec.gate_activation.apply_in_place(&mut a);
    let z = a.split_off(n);
    Ok((a, z))
}

pub fn gru_step(spec: &GruSpec, l: usize, k_prev_time: &[f64], k_prev_layer: &[f64]) -> Result<Vec<f64>> {
    let (r, z) = gru_gates(spec, l, k_prev_time, k_prev_layer)?;
    let layer = &spec.layers[l];
    let mut pre = layer.w_x.matvec(k_prev_layer)?;
    layer.w_g.matvec_add_into(&vector::hadamard(&r, k_prev_time), &mut pre);
    Ok((0..spec.dim)
        .map(|j| (1.0 - z[j]) * k_prev_time[j] + z[j] * pre[j].tanh())
        .collect())
}

pub fn gru_run(spec: &GruSpec, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut k = vec![vec![0.0; spec.dim]; spec.layers.len()];
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let mut below = x.clone();
        for l in 0..spec.layers.len() {
            k[l] = gru_step(spec, l, &k[l], &below)?;
            below = k[l].clone();
        }
        out.push(below);
    }
    Ok(out)
}

/// Random GRU whose input maps `W_x` are well conditioned (a rotation plus a
/// small perturbation), since the realization inverts them.
pub fn random_gru(rng: &mut impl Rng, layers: usize, dim: usize) -> GruSpec {
    let scale = 1.0 / ((2 * dim) as f64).sqrt();
    let layers = (0..layers)
        .map(|_| {
            let q = random_orthogonal(rng, dim);
            let w_x = &q + &gaussian_matrix(rng, dim, dim).scale(0.2 * scale);
            GruLayer {
                w: gaussian_matrix(rng, 2 * dim, 2 * dim).scale(scale),
                w_x,
                w_g: gaussian_matrix(rng, dim, dim).scale(scale),
                b: vec![],
            }
        })
        .collect();
    GruSpec::new(dim, layers)
}

/// Stage layout (0-based): stage `2l` holds `K_{t−1}^l`; stage `2l + 1` is
/// `D[1 − z]·K_{t−1}^l + D[z]·tanh(W_x·(u + h·α·K_{t−1}^l))` where `u` is the
/// input (layer 0) or the previous layer's stage, and `h·α = W_x⁻¹·W_g·D[r]`.
/// The composite activation `tanh(W_x·)` is the config's `inner` map.
#[derive(Clone, Debug)]
pub struct GruSchedule {
    spec: GruSpec,
    wx_inv_wg: Vec<Matrix>,
    k_prev: Vec<Vec<f64>>,
}

impl WeightSchedule for GruSchedule {
    fn prepare(&mut self, _step: usize, hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()> {
        let depth = self.spec.layers.len();
        let mut below = hist.get(0).to_vec();
        for l in 0..depth {
            let (r, z) = gru_gates(&self.spec, l, &self.k_prev[l], &below)?;
            params.b[2 * l] = self.k_prev[l].clone();
            params.gamma[2 * l + 1] = diag_embed(&z.iter().map(|v| 1.0 - v).collect::<Vec<_>>());
            params.kappa[2 * l + 1] = diag_embed(&z);
            params.alpha[2 * l + 1][2 * l] = self.wx_inv_wg[l].try_matmul(&diag_embed(&r))?.scale(1.0 / params.h);
            if l + 1 < depth {
                below = gru_step(&self.spec, l, &self.k_prev[l], &below)?;
            }
        }
        Ok(())
    }

    fn observe(&mut self, hiddens: &[Vec<f64>], _y_next: &[f64]) {
        for (l, k) in self.k_prev.iter_mut().enumerate() {
            k.clone_from(&hiddens[2 * l + 1]);
        }
    }

    fn reset(&mut self) {
        self.k_prev.iter_mut().for_each(|v| v.fill(0.0));
    }
}

pub(super) fn map(spec: &GruSpec) -> Result<(OdeRnnConfig, GruSchedule)> {
    let (n, depth) = (spec.dim, spec.layers.len());
    let stages = 2 * depth;
    let mut cfg = OdeRnnConfig::zeros(stages, 1, n, n);
    cfg.h = 1.0;
    cfg.inner = vec![None; stages];
    let mut wx_inv_wg = Vec::with_capacity(depth);
    for (l, layer) in spec.layers.iter().enumerate() {
        let inv = layer.w_x.inverse().map_err(|e| match e {
            Error::Singular => Error::UnsupportedSpec(format!("gru layer {l}: W_x is singular")),
            other => other,
        })?;
        wx_inv_wg.push(inv.try_matmul(&layer.w_g)?);
        let q = 2 * l + 1;
        cfg.activations[q] = Activation::Tanh;
        cfg.inner[q] = Some(layer.w_x.clone());
        if l == 0 {
            cfg.w[q] = Matrix::identity(n);
        } else {
            cfg.alpha[q][q - 2] = Matrix::scaled_identity(n, 1.0 / cfg.h);
        }
    }
    cfg.gamma[stages] = Matrix::zeros(n, n);
    cfg.beta[stages - 1] = Matrix::scaled_identity(n, 1.0 / cfg.h);
    cfg.weight_mode = WeightMode::Dynamical { source: "gru".into() };
    let sched = GruSchedule {
        spec: spec.clone(),
        wx_inv_wg,
        k_prev: vec![vec![0.0; n]; depth],
    };
    Ok((cfg, sched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{map_to_odernn, random_inputs, ArchSpec};
    use crate::numerics::random::rng_from_seed;

    fn oracle_run(spec: &GruSpec, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = spec.dim;
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = vec![vec![0.0; n]; spec.layers.len()];
        let mut out = Vec::new();
        for x in inputs {
            let mut input = x.clone();
            for (l, layer) in spec.layers.iter().enumerate() {
                let mut r = vec![0.0; n];
                let mut z = vec![0.0; n];
                for j in 0..n {
                    let (mut ar, mut az) = (0.0, 0.0);
                    for k in 0..n {
                        ar += layer.w.get(j, k) * input[k] + layer.w.get(j, n + k) * h[l][k];
                        az += layer.w.get(n + j, k) * input[k] + layer.w.get(n + j, n + k) * h[l][k];
                    }
                    r[j] = sig(ar);
                    z[j] = sig(az);
                }
                let mut next = vec![0.0; n];
                for j in 0..n {
                    let mut cand = 0.0;
                    for k in 0..n {
                        cand += layer.w_x.get(j, k) * input[k] + layer.w_g.get(j, k) * r[k] * h[l][k];
                    }
                    next[j] = (1.0 - z[j]) * h[l][j] + z[j] * cand.tanh();
                }
                h[l] = next;
                input = h[l].clone();
            }
            out.push(input);
        }
        out
    }

    fn zero_layer(n: usize) -> GruLayer {
        GruLayer {
            w: Matrix::zeros(2 * n, 2 * n),
            w_x: Matrix::zeros(n, n),
            w_g: Matrix::zeros(n, n),
            b: vec![],
        }
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let spec = GruSpec::new(2, vec![zero_layer(2)]);
        let k = gru_step(&spec, 0, &[1.0, -3.0], &[5.0, 5.0]).unwrap();
        assert_eq!(k, vec![0.5, -1.5]);
    }

    #[test]
    fn saturated_update_gate_copies() {
        let mut layer = zero_layer(2);
        layer.w_x = Matrix::identity(2);
        layer.b = vec![0.0, 0.0, -800.0, -800.0];
        let spec = GruSpec::new(2, vec![layer]);
        let k = gru_step(&spec, 0, &[0.25, -4.0], &[9.0, 9.0]).unwrap();
        assert_eq!(k, vec![0.25, -4.0]);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = rng_from_seed(21);
        for layers in 1..=2 {
            let spec = random_gru(&mut rng, layers, 4);
            let inputs = random_inputs(&mut rng, 4, 30);
            let a = gru_run(&spec, &inputs).unwrap();
            let b = oracle_run(&spec, &inputs);
            for (x, y) in a.iter().zip(&b) {
                assert!(vector::max_abs_diff(x, y) <= 1e-14);
            }
        }
    }

    #[test]
    fn singular_input_map_is_unsupported() {
        let spec = GruSpec::new(2, vec![zero_layer(2)]);
        assert!(matches!(map_to_odernn(&ArchSpec::Gru(spec)), Err(Error::UnsupportedSpec(_))));
    }

    #[test]
    fn realization_uses_the_composite_activation() {
        let mut rng = rng_from_seed(22);
        let spec = random_gru(&mut rng, 1, 4);
        let m = map_to_odernn(&ArchSpec::Gru(spec.clone())).unwrap();
        assert_eq!((m.config.n, m.config.t), (2, 1));
        assert_eq!(m.config.inner_map(1), Some(&spec.layers[0].w_x));
        let inputs = random_inputs(&mut rng, 4, 50);
        let native = gru_run(&spec, &inputs).unwrap();
        for (x, y) in native.iter().zip(&m.run(&inputs).unwrap()) {
            assert!(vector::max_abs_diff(x, y) <= 1e-12);
        }
    }
}

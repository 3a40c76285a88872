use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, check_shape};
use crate::error::{Error, Result};
use crate::numerics::{diag_embed, random::gaussian_matrix, random::gaussian_vec, vector, Activation, Matrix};
use crate::odernn::{InputHistory, OdeRnnConfig, WeightMode, WeightSchedule};

/// One LSTM layer: `(i, f, o, g) = σ(W·[K^{l−1}; K_{t−1}] + b)` with `W` of
/// shape 4n×2n, rows ordered `i, f, o, g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w: Matrix,
    #[serde(default)]
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub dim: usize,
    pub layers: Vec<LstmLayer>,
    /// Activations of `i, f, o, g`.
    #[serde(default = "default_gate_activations")]
    pub gate_activations: [Activation; 4],
}

fn default_gate_activations() -> [Activation; 4] {
    [Activation::Sigmoid, Activation::Sigmoid, Activation::Sigmoid, Activation::Tanh]
}

impl LstmSpec {
    pub fn new(dim: usize, layers: Vec<LstmLayer>) -> Self {
        LstmSpec {
            dim,
            layers,
            gate_activations: default_gate_activations(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.dim == 0 {
            return Err(Error::InvalidConfig("lstm needs at least one layer and dim >= 1".into()));
        }
        for layer in &self.layers {
            check_shape("lstm W", &layer.w, 4 * self.dim, 2 * self.dim)?;
            if !layer.b.is_empty() {
                check_len("lstm bias", &layer.b, 4 * self.dim)?;
            }
        }
        Ok(())
    }

    /// Number of entries in the stacked weight matrices.
    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * l.w.cols()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmGates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

/// Gate values of layer `l` from the previous hidden value of the same layer
/// and the current value of the layer below (the input for `l = 0`).
pub fn lstm_gates(spec: &LstmSpec, l: usize, k_prev_time: &[f64], k_prev_layer: &[f64]) -> Result<LstmGates> {
    let n = spec.dim;
    let layer = spec.layers.get(l).ok_or(Error::OutOfRange {
        index: l,
        max: spec.layers.len(),
    })?;
    check_len("lstm K_{t-1}", k_prev_time, n)?;
    check_len("lstm K^{l-1}", k_prev_layer, n)?;
    let mut z = if layer.b.is_empty() { vec![0.0; 4 * n] } else { layer.b.clone() };
    layer.w.matvec_add_into(&vector::concat(&[k_prev_layer, k_prev_time]), &mut z);
    let part = |j: usize| spec.gate_activations[j].apply(&z[j * n..(j + 1) * n]);
    Ok(LstmGates {
        i: part(0),
        f: part(1),
        o: part(2),
        g: part(3),
    })
}

/// `c_t = f∘c_{t−1} + i∘g`, `K_t = o∘tanh(c_t)`.
pub fn lstm_step(spec: &LstmSpec, l: usize, k_prev_time: &[f64], c_prev: &[f64], k_prev_layer: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("lstm c_{t-1}", c_prev, spec.dim)?;
    let gates = lstm_gates(spec, l, k_prev_time, k_prev_layer)?;
    let c: Vec<f64> = (0..spec.dim).map(|j| gates.f[j] * c_prev[j] + gates.i[j] * gates.g[j]).collect();
    let k = c.iter().zip(&gates.o).map(|(cj, oj)| oj * cj.tanh()).collect();
    Ok((k, c))
}

/// Runs the stack from zero state; output `t` is the top layer's `K_t`.
pub fn lstm_run(spec: &LstmSpec, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let (n, depth) = (spec.dim, spec.layers.len());
    let mut k = vec![vec![0.0; n]; depth];
    let mut c = vec![vec![0.0; n]; depth];
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let mut below = x.clone();
        for l in 0..depth {
            let (kl, cl) = lstm_step(spec, l, &k[l], &c[l], &below)?;
            k[l] = kl;
            c[l] = cl;
            below = k[l].clone();
        }
        out.push(below);
    }
    Ok(out)
}

pub fn random_lstm(rng: &mut impl Rng, layers: usize, dim: usize) -> LstmSpec {
    let scale = 1.0 / ((2 * dim) as f64).sqrt();
    let layers = (0..layers)
        .map(|_| LstmLayer {
            w: gaussian_matrix(rng, 4 * dim, 2 * dim).scale(scale),
            b: vector::scale(&gaussian_vec(rng, 4 * dim), 0.5),
        })
        .collect();
    LstmSpec::new(dim, layers)
}

/// Stage layout for `L` layers (0-based): stage `3l` holds `c_{t−1}^l`, stage
/// `3l + 1` computes `c_t^l = D[f]·c_{t−1}^l + D[i]·σ_g(W_gx·K_t^{l−1} + W_gh·K_{t−1}^l + b_g)`
/// and, below the top layer, stage `3l + 2` computes `K_t^l = D[o]·tanh(c_t^l)`.
/// The output applies `D[o]·tanh` to the top cell, so `n = 3L − 1`, `t = 1`.
#[derive(Clone, Debug)]
pub struct LstmSchedule {
    spec: LstmSpec,
    k_prev: Vec<Vec<f64>>,
    c_prev: Vec<Vec<f64>>,
}

impl LstmSchedule {
    fn new(spec: LstmSpec) -> Self {
        let (n, depth) = (spec.dim, spec.layers.len());
        LstmSchedule {
            spec,
            k_prev: vec![vec![0.0; n]; depth],
            c_prev: vec![vec![0.0; n]; depth],
        }
    }
}

impl WeightSchedule for LstmSchedule {
    fn prepare(&mut self, _step: usize, hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()> {
        let (n, depth) = (self.spec.dim, self.spec.layers.len());
        let stages = params.n;
        let mut below = hist.get(0).to_vec();
        for l in 0..depth {
            let gates = lstm_gates(&self.spec, l, &self.k_prev[l], &below)?;
            let layer = &self.spec.layers[l];
            params.b[3 * l] = self.c_prev[l].clone();
            params.gamma[3 * l + 1] = diag_embed(&gates.f);
            params.kappa[3 * l + 1] = diag_embed(&gates.i);
            let mut bias = if layer.b.is_empty() {
                vec![0.0; n]
            } else {
                layer.b[3 * n..].to_vec()
            };
            layer.w.block(3 * n, n, n, n).matvec_add_into(&self.k_prev[l], &mut bias);
            params.b[3 * l + 1] = bias;
            let o = diag_embed(&gates.o);
            if l + 1 < depth {
                params.kappa[3 * l + 2] = o;
                below = (0..n)
                    .map(|j| gates.o[j] * (gates.f[j] * self.c_prev[l][j] + gates.i[j] * gates.g[j]).tanh())
                    .collect();
            } else {
                params.kappa[stages] = o;
            }
        }
        Ok(())
    }

    fn observe(&mut self, hiddens: &[Vec<f64>], y_next: &[f64]) {
        let depth = self.spec.layers.len();
        for l in 0..depth {
            self.c_prev[l].clone_from(&hiddens[3 * l + 1]);
            if l + 1 < depth {
                self.k_prev[l].clone_from(&hiddens[3 * l + 2]);
            } else {
                self.k_prev[l] = y_next.to_vec();
            }
        }
    }

    fn reset(&mut self) {
        self.k_prev.iter_mut().chain(self.c_prev.iter_mut()).for_each(|v| v.fill(0.0));
    }
}

pub(super) fn map(spec: &LstmSpec) -> Result<(OdeRnnConfig, LstmSchedule)> {
    let (n, depth) = (spec.dim, spec.layers.len());
    let stages = 3 * depth - 1;
    let mut cfg = OdeRnnConfig::zeros(stages, 1, n, n);
    cfg.h = 1.0;
    let inv_h = Matrix::scaled_identity(n, 1.0 / cfg.h);
    for (l, layer) in spec.layers.iter().enumerate() {
        let c = 3 * l + 1;
        cfg.activations[c] = spec.gate_activations[3];
        let w_gx = layer.w.block(3 * n, 0, n, n);
        if l == 0 {
            cfg.w[c] = w_gx;
        } else {
            cfg.alpha[c][c - 2] = w_gx.scale(1.0 / cfg.h);
        }
        if l + 1 < depth {
            cfg.activations[c + 1] = Activation::Tanh;
            cfg.alpha[c + 1][c] = inv_h.clone();
        }
    }
    cfg.gamma[stages] = Matrix::zeros(n, n);
    cfg.activations[stages] = Activation::Tanh;
    cfg.beta[stages - 1] = inv_h;
    cfg.weight_mode = WeightMode::Dynamical { source: "lstm".into() };
    Ok((cfg, LstmSchedule::new(spec.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{equivalence_check, map_to_odernn, random_inputs, ArchSpec};
    use crate::numerics::random::rng_from_seed;
    use proptest::prelude::*;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Textbook single-cell LSTM with separate input and recurrent matrices,
    /// written with explicit loops.
    fn oracle_run(spec: &LstmSpec, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = spec.dim;
        let mut h = vec![vec![0.0; n]; spec.layers.len()];
        let mut c = vec![vec![0.0; n]; spec.layers.len()];
        let mut out = Vec::new();
        for x in inputs {
            let mut input = x.clone();
            for (l, layer) in spec.layers.iter().enumerate() {
                let gate = |g: usize, j: usize| {
                    let r = g * n + j;
                    let mut acc = layer.b[r];
                    for k in 0..n {
                        acc += layer.w.get(r, k) * input[k] + layer.w.get(r, n + k) * h[l][k];
                    }
                    acc
                };
                let mut hn = vec![0.0; n];
                let mut cn = vec![0.0; n];
                for j in 0..n {
                    let (ig, fg, og, gg) = (sigmoid(gate(0, j)), sigmoid(gate(1, j)), sigmoid(gate(2, j)), gate(3, j).tanh());
                    cn[j] = fg * c[l][j] + ig * gg;
                    hn[j] = og * cn[j].tanh();
                }
                h[l] = hn;
                c[l] = cn;
                input = h[l].clone();
            }
            out.push(input);
        }
        out
    }

    #[test]
    fn zero_weights_halve_the_cell() {
        let n = 3;
        let spec = LstmSpec::new(
            n,
            vec![LstmLayer {
                w: Matrix::zeros(4 * n, 2 * n),
                b: vec![],
            }],
        );
        let g = lstm_gates(&spec, 0, &[0.3; 3], &[1.0; 3]).unwrap();
        assert_eq!(
            (g.i.clone(), g.f.clone(), g.o.clone(), g.g.clone()),
            (vec![0.5; 3], vec![0.5; 3], vec![0.5; 3], vec![0.0; 3])
        );
        let c_prev = [1.0, -2.0, 0.5];
        let (k, c) = lstm_step(&spec, 0, &[0.0; 3], &c_prev, &[0.7; 3]).unwrap();
        for j in 0..n {
            assert_eq!(c[j], 0.5 * c_prev[j]);
            assert_eq!(k[j], 0.5 * (0.5 * c_prev[j]).tanh());
        }
        let (k, _) = lstm_step(&spec, 0, &[0.0; 3], &[0.0; 3], &[0.7; 3]).unwrap();
        assert_eq!(k, vec![0.0; 3]);
        // The zero-weight map keeps the cell and hidden value at zero from zero state.
        let rep = equivalence_check(&ArchSpec::Lstm(spec), &vec![vec![1.0; 3]; 5]).unwrap();
        assert_eq!(rep.max_deviation, 0.0);
    }

    #[test]
    fn matches_textbook_oracle() {
        let mut rng = rng_from_seed(11);
        for layers in 1..=2 {
            let spec = random_lstm(&mut rng, layers, 4);
            let inputs = random_inputs(&mut rng, 4, 30);
            let a = lstm_run(&spec, &inputs).unwrap();
            let b = oracle_run(&spec, &inputs);
            for (x, y) in a.iter().zip(&b) {
                assert!(vector::max_abs_diff(x, y) <= 1e-14);
            }
        }
    }

    #[test]
    fn mapped_single_layer_has_two_stages() {
        let mut rng = rng_from_seed(12);
        let spec = random_lstm(&mut rng, 1, 4);
        let m = map_to_odernn(&ArchSpec::Lstm(spec.clone())).unwrap();
        assert_eq!((m.config.n, m.config.t), (2, 1));
        let inputs = random_inputs(&mut rng, 4, 50);
        let native = lstm_run(&spec, &inputs).unwrap();
        let mapped = m.run(&inputs).unwrap();
        for (x, y) in native.iter().zip(&mapped) {
            assert!(vector::max_abs_diff(x, y) <= 1e-12);
        }
        assert_eq!(spec.weight_count(), 8 * 16);
    }

    #[test]
    fn rejects_bad_shapes() {
        let spec = LstmSpec::new(
            2,
            vec![LstmLayer {
                w: Matrix::zeros(8, 3),
                b: vec![],
            }],
        );
        assert!(matches!(spec.validate(), Err(Error::DimMismatch { .. })));
        let ok = LstmSpec::new(
            2,
            vec![LstmLayer {
                w: Matrix::zeros(8, 4),
                b: vec![],
            }],
        );
        assert!(matches!(lstm_gates(&ok, 0, &[0.0; 3], &[0.0; 2]), Err(Error::DimMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sigmoid_gates_are_open_interval(seed in any::<u64>(), dim in 1usize..8) {
            let mut rng = rng_from_seed(seed);
            let spec = random_lstm(&mut rng, 1, dim);
            let g = lstm_gates(&spec, 0, &gaussian_vec(&mut rng, dim), &gaussian_vec(&mut rng, dim)).unwrap();
            for v in g.i.iter().chain(&g.f).chain(&g.o) {
                prop_assert!(*v > 0.0 && *v < 1.0);
            }
        }
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, check_shape};
use crate::error::{Error, Result};
use crate::numerics::{diag_embed, random::gaussian_matrix, Activation, Matrix};
use crate::odernn::{InputHistory, OdeRnnConfig, WeightMode, WeightSchedule};

/// Clockwork RNN: the hidden state is split into blocks; at step `t` (from 0)
/// block `g` is updated iff `t mod periods[g] == 0` and copied otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwRnnSpec {
    pub input_dim: usize,
    /// Block sizes; they must sum to the hidden dimension.
    pub blocks: Vec<usize>,
    /// Per-block periods; empty means `1, 2, 4, …`.
    #[serde(default)]
    pub periods: Vec<usize>,
    pub w_h: Matrix,
    pub w_i: Matrix,
    pub w_o: Matrix,
    #[serde(default = "default_hidden")]
    pub sigma_h: Activation,
    #[serde(default)]
    pub sigma_o: Activation,
}

fn default_hidden() -> Activation {
    Activation::Tanh
}

impl CwRnnSpec {
    pub fn hidden_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn effective_periods(&self) -> Vec<usize> {
        if self.periods.is_empty() {
            (0..self.blocks.len()).map(|g| 1usize << g.min(62)).collect()
        } else {
            self.periods.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(Error::BadPartition("blocks must be non-empty with positive sizes".into()));
        }
        if !self.periods.is_empty() && self.periods.len() != self.blocks.len() {
            return Err(Error::BadPartition(format!(
                "{} periods for {} blocks",
                self.periods.len(),
                self.blocks.len()
            )));
        }
        if self.periods.contains(&0) {
            return Err(Error::BadPartition("periods must be positive".into()));
        }
        let p = self.hidden_dim();
        if self.w_h.rows() != p {
            return Err(Error::BadPartition(format!(
                "blocks cover {p} units, W_H has {} rows",
                self.w_h.rows()
            )));
        }
        check_shape("cwrnn W_H", &self.w_h, p, p)?;
        check_shape("cwrnn W_I", &self.w_i, p, self.input_dim)?;
        check_shape("cwrnn W_o", &self.w_o, self.input_dim, p)?;
        Ok(())
    }
}

/// Per-unit activity at step `t`: 1 for units of active blocks, 0 otherwise.
pub fn cwrnn_active_mask(spec: &CwRnnSpec, t: usize) -> Vec<f64> {
    let mut mask = Vec::with_capacity(spec.hidden_dim());
    for (&size, &period) in spec.blocks.iter().zip(&spec.effective_periods()) {
        let on = if t % period == 0 { 1.0 } else { 0.0 };
        mask.extend(std::iter::repeat_n(on, size));
    }
    mask
}

/// One step: returns the new hidden state `K_t` and the output `Y_{t+1} = σ_o(W_o·K_t)`.
pub fn cwrnn_step(spec: &CwRnnSpec, t: usize, k_prev: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    check_len("cwrnn K_{t-1}", k_prev, spec.hidden_dim())?;
    check_len("cwrnn Y_t", y, spec.input_dim)?;
    let mut k = k_prev.to_vec();
    let mut start = 0;
    for (&size, &period) in spec.blocks.iter().zip(&spec.effective_periods()) {
        if t % period == 0 {
            for r in start..start + size {
                let mut acc = 0.0;
                for (c, kc) in k_prev.iter().enumerate() {
                    acc += spec.w_h.get(r, c) * kc;
                }
                for (c, yc) in y.iter().enumerate() {
                    acc += spec.w_i.get(r, c) * yc;
                }
                k[r] = spec.sigma_h.eval(acc);
            }
        }
        start += size;
    }
    let mut out = spec.w_o.matvec(&k)?;
    spec.sigma_o.apply_in_place(&mut out);
    Ok((k, out))
}

pub fn cwrnn_run(spec: &CwRnnSpec, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut k = vec![0.0; spec.hidden_dim()];
    let mut out = Vec::with_capacity(inputs.len());
    for (t, y) in inputs.iter().enumerate() {
        let (kn, yn) = cwrnn_step(spec, t, &k, y)?;
        k = kn;
        out.push(yn);
    }
    Ok(out)
}

/// `clocks` blocks of roughly `dim / clocks` units each (at least one), with
/// default periods and input/output dimension `dim`.
pub fn random_cwrnn(rng: &mut impl Rng, clocks: usize, dim: usize) -> CwRnnSpec {
    let clocks = clocks.max(1);
    let blocks: Vec<usize> = (0..clocks).map(|g| (dim / clocks + usize::from(g < dim % clocks)).max(1)).collect();
    let p: usize = blocks.iter().sum();
    let scale = 1.0 / ((p + dim) as f64).sqrt();
    CwRnnSpec {
        input_dim: dim,
        blocks,
        periods: vec![],
        w_h: gaussian_matrix(rng, p, p).scale(scale),
        w_i: gaussian_matrix(rng, p, dim).scale(scale),
        w_o: gaussian_matrix(rng, dim, p).scale(1.0 / (p as f64).sqrt()),
        sigma_h: Activation::Tanh,
        sigma_o: Activation::Identity,
    }
}

/// Two stages: stage 0 holds `K_{t−1}`, stage 1 is
/// `D[inactive]·K_{t−1} + D[active]·σ_h(W_I·Y_t + h·α·K_{t−1})` with `h·α = W_H`;
/// the output is `σ_o(h·β·K_t)` with `h·β = W_o`.
#[derive(Clone, Debug)]
pub struct CwRnnSchedule {
    spec: CwRnnSpec,
    k_prev: Vec<f64>,
}

impl WeightSchedule for CwRnnSchedule {
    fn prepare(&mut self, step: usize, _hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()> {
        let mask = cwrnn_active_mask(&self.spec, step);
        params.b[0] = self.k_prev.clone();
        params.gamma[1] = diag_embed(&mask.iter().map(|m| 1.0 - m).collect::<Vec<_>>());
        params.kappa[1] = diag_embed(&mask);
        Ok(())
    }

    fn observe(&mut self, hiddens: &[Vec<f64>], _y_next: &[f64]) {
        self.k_prev.clone_from(&hiddens[1]);
    }

    fn reset(&mut self) {
        self.k_prev.fill(0.0);
    }
}

pub(super) fn map(spec: &CwRnnSpec) -> Result<(OdeRnnConfig, CwRnnSchedule)> {
    let (s, p) = (spec.input_dim, spec.hidden_dim());
    let mut cfg = OdeRnnConfig::zeros(2, 1, s, p);
    cfg.h = 1.0;
    cfg.w[1] = spec.w_i.clone();
    cfg.activations[1] = spec.sigma_h;
    cfg.alpha[1][0] = spec.w_h.scale(1.0 / cfg.h);
    cfg.beta[1] = spec.w_o.scale(1.0 / cfg.h);
    cfg.gamma[2] = Matrix::zeros(s, s);
    cfg.activations[2] = spec.sigma_o;
    cfg.weight_mode = WeightMode::Dynamical { source: "cwrnn".into() };
    Ok((
        cfg,
        CwRnnSchedule {
            spec: spec.clone(),
            k_prev: vec![0.0; p],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{map_to_odernn, random_inputs, ArchSpec};
    use crate::numerics::random::{gaussian_vec, rng_from_seed};
    use crate::numerics::vector;
    use proptest::prelude::*;

    #[test]
    fn unit_periods_give_a_dense_step() {
        let mut rng = rng_from_seed(51);
        let mut spec = random_cwrnn(&mut rng, 3, 6);
        spec.periods = vec![1, 1, 1];
        let k_prev = gaussian_vec(&mut rng, 6);
        let y = gaussian_vec(&mut rng, 6);
        let (k, out) = cwrnn_step(&spec, 7, &k_prev, &y).unwrap();
        let mut pre = spec.w_h.matvec(&k_prev).unwrap();
        spec.w_i.matvec_add_into(&y, &mut pre);
        let dense: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        assert!(vector::max_abs_diff(&k, &dense) <= 1e-14);
        assert!(vector::max_abs_diff(&out, &spec.w_o.matvec(&k).unwrap()) <= 1e-15);
    }

    #[test]
    fn slow_block_holds_at_odd_steps() {
        let mut rng = rng_from_seed(52);
        let spec = random_cwrnn(&mut rng, 2, 4);
        assert_eq!(spec.effective_periods(), vec![1, 2]);
        let k_prev = gaussian_vec(&mut rng, 4);
        let (k, _) = cwrnn_step(&spec, 3, &k_prev, &gaussian_vec(&mut rng, 4)).unwrap();
        assert_eq!(&k[2..], &k_prev[2..]);
        assert_ne!(&k[..2], &k_prev[..2]);
    }

    #[test]
    fn partitions_are_checked() {
        let mut rng = rng_from_seed(53);
        let mut spec = random_cwrnn(&mut rng, 2, 4);
        spec.blocks = vec![2, 3];
        assert!(matches!(spec.validate(), Err(Error::BadPartition(_))));
        spec.blocks = vec![2, 2];
        spec.periods = vec![1];
        assert!(matches!(spec.validate(), Err(Error::BadPartition(_))));
        spec.periods = vec![1, 0];
        assert!(matches!(spec.validate(), Err(Error::BadPartition(_))));
    }

    #[test]
    fn realization_holds_inactive_blocks_exactly() {
        let mut rng = rng_from_seed(54);
        let spec = random_cwrnn(&mut rng, 3, 6);
        let m = map_to_odernn(&ArchSpec::Cwrnn(spec.clone())).unwrap();
        assert_eq!((m.config.n, m.config.t), (2, 1));
        let inputs = random_inputs(&mut rng, 6, 50);
        for (x, y) in cwrnn_run(&spec, &inputs).unwrap().iter().zip(&m.run(&inputs).unwrap()) {
            assert!(vector::max_abs_diff(x, y) <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn blocks_change_only_on_their_clock(seed in any::<u64>(), clocks in 1usize..4, steps in 1usize..40) {
            let mut rng = rng_from_seed(seed);
            let spec = random_cwrnn(&mut rng, clocks, 6);
            let periods = spec.effective_periods();
            let mut k = gaussian_vec(&mut rng, spec.hidden_dim());
            for t in 0..steps {
                let (kn, _) = cwrnn_step(&spec, t, &k, &gaussian_vec(&mut rng, 6)).unwrap();
                let mut start = 0;
                for (g, &size) in spec.blocks.iter().enumerate() {
                    if t % periods[g] != 0 {
                        prop_assert_eq!(&kn[start..start + size], &k[start..start + size]);
                    }
                    start += size;
                }
                k = kn;
            }
        }
    }
}

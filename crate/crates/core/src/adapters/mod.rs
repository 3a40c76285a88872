//! Reference LSTM, GRU, URNN and clockwork RNN cells, and their realizations
//! as dynamical-weight ODERNNs.
//!
//! Each mapping returns the initial config together with a [`WeightSchedule`]
//! that rewrites the gate-dependent weights before every step and keeps the
//! recurrent state (cell values, previous hidden values) from the stage values
//! the ODERNN produced.

mod cwrnn;
mod gru;
mod lstm;
mod urnn;

pub use cwrnn::{cwrnn_active_mask, cwrnn_run, cwrnn_step, random_cwrnn, CwRnnSchedule, CwRnnSpec};
pub use gru::{gru_gates, gru_run, gru_step, random_gru, GruLayer, GruSchedule, GruSpec};
pub use lstm::{lstm_gates, lstm_run, lstm_step, random_lstm, LstmGates, LstmLayer, LstmSchedule, LstmSpec};
pub use urnn::{random_urnn, urnn_run, urnn_step, UrnnLayer, UrnnSchedule, UrnnSpec};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{random::gaussian_vec, vector, Matrix};
use crate::odernn::{InputHistory, OdeRnn, OdeRnnConfig, WeightSchedule};

/// Order pair of an ODERNN, always reported by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orders {
    pub nonlinearity_order: usize,
    pub memory_order: usize,
}

/// Any of the supported architectures, tagged by `"arch"` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ArchSpec {
    Lstm(LstmSpec),
    Gru(GruSpec),
    Urnn(UrnnSpec),
    Cwrnn(CwRnnSpec),
}

impl ArchSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ArchSpec::Lstm(_) => "lstm",
            ArchSpec::Gru(_) => "gru",
            ArchSpec::Urnn(_) => "urnn",
            ArchSpec::Cwrnn(_) => "cwrnn",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ArchSpec::Lstm(s) => s.dim,
            ArchSpec::Gru(s) => s.dim,
            ArchSpec::Urnn(s) => s.dim,
            ArchSpec::Cwrnn(s) => s.input_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArchSpec::Lstm(s) => s.validate(),
            ArchSpec::Gru(s) => s.validate(),
            ArchSpec::Urnn(s) => s.validate(),
            ArchSpec::Cwrnn(s) => s.validate(),
        }
    }

    /// Native run: output `i` is the architecture's output after reading input `i`.
    pub fn native_run(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            ArchSpec::Lstm(s) => lstm_run(s, inputs),
            ArchSpec::Gru(s) => gru_run(s, inputs),
            ArchSpec::Urnn(s) => urnn_run(s, inputs),
            ArchSpec::Cwrnn(s) => cwrnn_run(s, inputs),
        }
    }

    /// The architecture's order pair as stated by the categorization table.
    pub fn claimed_orders(&self) -> Orders {
        let (n, t) = match self {
            ArchSpec::Lstm(s) => (2, s.layers.len()),
            ArchSpec::Gru(s) => (2, s.layers.len()),
            ArchSpec::Urnn(s) => (2, s.layers.len()),
            ArchSpec::Cwrnn(s) => (s.blocks.len(), s.blocks.len()),
        };
        Orders {
            nonlinearity_order: n,
            memory_order: t,
        }
    }
}

/// Schedule of a mapped architecture.
#[derive(Clone, Debug)]
pub enum ArchSchedule {
    Lstm(LstmSchedule),
    Gru(GruSchedule),
    Urnn(UrnnSchedule),
    Cwrnn(CwRnnSchedule),
}

impl WeightSchedule for ArchSchedule {
    fn prepare(&mut self, step: usize, hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()> {
        match self {
            ArchSchedule::Lstm(s) => s.prepare(step, hist, params),
            ArchSchedule::Gru(s) => s.prepare(step, hist, params),
            ArchSchedule::Urnn(s) => s.prepare(step, hist, params),
            ArchSchedule::Cwrnn(s) => s.prepare(step, hist, params),
        }
    }

    fn observe(&mut self, hiddens: &[Vec<f64>], y_next: &[f64]) {
        match self {
            ArchSchedule::Lstm(s) => s.observe(hiddens, y_next),
            ArchSchedule::Gru(s) => s.observe(hiddens, y_next),
            ArchSchedule::Urnn(s) => s.observe(hiddens, y_next),
            ArchSchedule::Cwrnn(s) => s.observe(hiddens, y_next),
        }
    }

    fn reset(&mut self) {
        match self {
            ArchSchedule::Lstm(s) => s.reset(),
            ArchSchedule::Gru(s) => s.reset(),
            ArchSchedule::Urnn(s) => s.reset(),
            ArchSchedule::Cwrnn(s) => s.reset(),
        }
    }
}

/// An architecture realized as an ODERNN.
#[derive(Clone, Debug)]
pub struct MappedOdeRnn {
    /// Parameters before the first step; the gate-dependent entries are
    /// rewritten by `schedule` each step.
    pub config: OdeRnnConfig,
    pub schedule: ArchSchedule,
    pub claimed: Orders,
    pub realized: Orders,
}

impl MappedOdeRnn {
    pub fn run(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        OdeRnn::with_schedule(self.config.clone(), self.schedule.clone())?.run(inputs)
    }
}

pub fn map_to_odernn(spec: &ArchSpec) -> Result<MappedOdeRnn> {
    spec.validate()?;
    let (config, schedule) = match spec {
        ArchSpec::Lstm(s) => {
            let (c, sch) = lstm::map(s)?;
            (c, ArchSchedule::Lstm(sch))
        }
        ArchSpec::Gru(s) => {
            let (c, sch) = gru::map(s)?;
            (c, ArchSchedule::Gru(sch))
        }
        ArchSpec::Urnn(s) => {
            let (c, sch) = urnn::map(s)?;
            (c, ArchSchedule::Urnn(sch))
        }
        ArchSpec::Cwrnn(s) => {
            let (c, sch) = cwrnn::map(s)?;
            (c, ArchSchedule::Cwrnn(sch))
        }
    };
    let realized = Orders {
        nonlinearity_order: config.n,
        memory_order: config.t,
    };
    Ok(MappedOdeRnn {
        config,
        schedule,
        claimed: spec.claimed_orders(),
        realized,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub arch: String,
    pub steps: usize,
    pub max_deviation: f64,
    pub claimed: Orders,
    pub realized: Orders,
}

/// Runs the native cell and its ODERNN realization on the same inputs.
pub fn equivalence_check(spec: &ArchSpec, inputs: &[Vec<f64>]) -> Result<EquivalenceReport> {
    let mapped = map_to_odernn(spec)?;
    let native = spec.native_run(inputs)?;
    let realized = mapped.run(inputs)?;
    let max_deviation = native
        .iter()
        .zip(&realized)
        .map(|(a, b)| vector::max_abs_diff(a, b))
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        arch: spec.name().into(),
        steps: inputs.len(),
        max_deviation,
        claimed: mapped.claimed,
        realized: mapped.realized,
    })
}

/// Gaussian input sequence of the given length.
pub fn random_inputs(rng: &mut impl Rng, dim: usize, steps: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|_| gaussian_vec(rng, dim)).collect()
}

/// Random spec of the named architecture with hidden size `dim` and `layers`
/// layers (for the clockwork RNN, `layers` clocks).
pub fn random_spec(rng: &mut impl Rng, arch: &str, layers: usize, dim: usize) -> Result<ArchSpec> {
    Ok(match arch {
        "lstm" => ArchSpec::Lstm(random_lstm(rng, layers, dim)),
        "gru" => ArchSpec::Gru(random_gru(rng, layers, dim)),
        "urnn" => ArchSpec::Urnn(random_urnn(rng, layers, dim)?),
        "cwrnn" => ArchSpec::Cwrnn(random_cwrnn(rng, layers, dim)),
        other => return Err(Error::UnsupportedSpec(format!("unknown architecture `{other}`"))),
    })
}

pub(crate) fn check_shape(ctx: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dims(ctx, format!("{rows}x{cols}"), format!("{}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

pub(crate) fn check_len(ctx: &'static str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dims(ctx, len, v.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{diag_embed, random::rng_from_seed};

    #[test]
    fn every_architecture_matches_its_realization() {
        let mut rng = rng_from_seed(4);
        for arch in ["lstm", "gru", "urnn", "cwrnn"] {
            for layers in 1..=3 {
                let spec = random_spec(&mut rng, arch, layers, 4).unwrap();
                let inputs = random_inputs(&mut rng, spec.input_dim(), 50);
                let rep = equivalence_check(&spec, &inputs).unwrap();
                assert!(rep.max_deviation <= 1e-12, "{arch} L={layers}: {}", rep.max_deviation);
                assert_eq!(rep.steps, 50);
            }
        }
    }

    #[test]
    fn spec_json_round_trip_is_tagged() {
        let mut rng = rng_from_seed(5);
        for arch in ["lstm", "gru", "urnn", "cwrnn"] {
            let spec = random_spec(&mut rng, arch, 2, 3).unwrap();
            let text = serde_json::to_string(&spec).unwrap();
            assert!(text.contains(&format!("\"arch\":\"{arch}\"")));
            let back: ArchSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
        assert!(matches!(random_spec(&mut rng, "transformer", 1, 2), Err(Error::UnsupportedSpec(_))));
    }

    #[test]
    fn orders_are_reported_by_name() {
        let mut rng = rng_from_seed(6);
        let m = map_to_odernn(&random_spec(&mut rng, "lstm", 3, 2).unwrap()).unwrap();
        assert_eq!(
            m.claimed,
            Orders {
                nonlinearity_order: 2,
                memory_order: 3
            }
        );
        assert_eq!(
            m.realized,
            Orders {
                nonlinearity_order: 8,
                memory_order: 1
            }
        );
        let v = serde_json::to_value(m.realized).unwrap();
        assert_eq!(v["nonlinearity_order"], 8);
        assert!(matches!(m.config.weight_mode, crate::odernn::WeightMode::Dynamical { .. }));
    }

    #[test]
    fn diagonal_products_match_hadamard_bitwise() {
        let mut rng = rng_from_seed(7);
        for _ in 0..100 {
            let a = gaussian_vec(&mut rng, 8);
            let b = gaussian_vec(&mut rng, 8);
            let via_matrix = diag_embed(&a).matvec(&b).unwrap();
            let direct = vector::hadamard(&a, &b);
            for (x, y) in via_matrix.iter().zip(&direct) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

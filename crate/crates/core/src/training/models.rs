use serde::{Deserialize, Serialize};

use crate::adapters::ArchSpec;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::odernn::{odernn_run, OdeRnnConfig};
use crate::qunn::{qunn_forward, PSchedule, QunnConfig, SkipMap};

use super::fd::{sgd, SgdConfig, TrainTrace};
use super::tasks::{masked_mse, Sequence};

/// A trainable sequence model: a flat parameter vector plus a forward pass
/// whose output `i` is the prediction made after reading input `i`.
pub trait Model: Sized + Sync {
    fn params(&self) -> Vec<f64>;

    fn with_params(&self, params: &[f64]) -> Result<Self>;

    fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    fn loss(&self, seq: &Sequence) -> Result<f64> {
        masked_mse(&self.predict(&seq.inputs)?, seq)
    }
}

fn check_count(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dims("parameter vector", expected, got))
    }
}

/// Clipped FD-SGD of `model` on `seq`; returns the trained model and its trace.
pub fn train_model<M: Model>(model: &M, seq: &Sequence, cfg: &SgdConfig) -> Result<(M, TrainTrace)> {
    let trace = sgd(|p: &[f64]| model.with_params(p)?.loss(seq), &model.params(), cfg);
    Ok((model.with_params(&trace.params)?, trace))
}

/// ODERNN with trainable `W_q`, `b_q` for the stages and, optionally, the
/// output weights `W_{n+1}`, `b_{n+1}`. Everything else stays fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeRnnModel {
    pub config: OdeRnnConfig,
    #[serde(default)]
    pub train_output: bool,
}

impl OdeRnnModel {
    pub fn new(config: OdeRnnConfig, train_output: bool) -> Result<Self> {
        config.validate()?;
        Ok(OdeRnnModel { config, train_output })
    }

    fn trained(&self) -> usize {
        self.config.n + usize::from(self.train_output)
    }
}

impl Model for OdeRnnModel {
    fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for q in 0..self.trained() {
            out.extend_from_slice(self.config.w[q].data());
            out.extend_from_slice(&self.config.b[q]);
        }
        out
    }

    fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut next = self.clone();
        let mut rest = params;
        for q in 0..self.trained() {
            let (wn, bn) = (next.config.w[q].data().len(), next.config.b[q].len());
            if rest.len() < wn + bn {
                return Err(Error::dims("parameter vector", self.params().len(), params.len()));
            }
            next.config.w[q].data_mut().copy_from_slice(&rest[..wn]);
            next.config.b[q].copy_from_slice(&rest[wn..wn + bn]);
            rest = &rest[wn + bn..];
        }
        check_count(0, rest.len()).map_err(|_| Error::dims("parameter vector", self.params().len(), params.len()))?;
        Ok(next)
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        odernn_run(&self.config, inputs)
    }
}

enum Slot<'a> {
    Dense(&'a mut [f64]),
    /// Skew-symmetric matrix stored by its strict upper triangle.
    Skew(&'a mut Matrix),
}

fn arch_slots(spec: &mut ArchSpec) -> Vec<Slot<'_>> {
    let mut slots = Vec::new();
    match spec {
        ArchSpec::Lstm(s) => {
            for layer in &mut s.layers {
                slots.push(Slot::Dense(layer.w.data_mut()));
                slots.push(Slot::Dense(&mut layer.b));
            }
        }
        ArchSpec::Gru(s) => {
            for layer in &mut s.layers {
                slots.push(Slot::Dense(layer.w.data_mut()));
                slots.push(Slot::Dense(layer.w_x.data_mut()));
                slots.push(Slot::Dense(layer.w_g.data_mut()));
                slots.push(Slot::Dense(&mut layer.b));
            }
        }
        ArchSpec::Urnn(s) => {
            for layer in &mut s.layers {
                slots.push(Slot::Skew(&mut layer.a));
                slots.push(Slot::Dense(layer.v.data_mut()));
            }
        }
        ArchSpec::Cwrnn(s) => {
            slots.push(Slot::Dense(s.w_h.data_mut()));
            slots.push(Slot::Dense(s.w_i.data_mut()));
            slots.push(Slot::Dense(s.w_o.data_mut()));
        }
    }
    slots
}

/// Any adapter architecture trained through its native step. URNN generators
/// are parameterized by their strict upper triangle so they stay skew.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchModel {
    pub spec: ArchSpec,
}

impl ArchModel {
    pub fn new(spec: ArchSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ArchModel { spec })
    }
}

impl Model for ArchModel {
    fn params(&self) -> Vec<f64> {
        let mut spec = self.spec.clone();
        let mut out = Vec::new();
        for slot in arch_slots(&mut spec) {
            match slot {
                Slot::Dense(v) => out.extend_from_slice(v),
                Slot::Skew(a) => {
                    for i in 0..a.rows() {
                        for j in i + 1..a.cols() {
                            out.push(a.get(i, j));
                        }
                    }
                }
            }
        }
        out
    }

    fn with_params(&self, params: &[f64]) -> Result<Self> {
        let expected = self.params().len();
        check_count(expected, params.len())?;
        let mut spec = self.spec.clone();
        let mut it = params.iter().copied();
        for slot in arch_slots(&mut spec) {
            match slot {
                Slot::Dense(v) => v.iter_mut().zip(&mut it).for_each(|(x, p)| *x = p),
                Slot::Skew(a) => {
                    for i in 0..a.rows() {
                        for j in i + 1..a.cols() {
                            let p = it.next().unwrap_or_default();
                            a.set(i, j, p);
                            a.set(j, i, -p);
                        }
                    }
                }
            }
        }
        Ok(ArchModel { spec })
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.spec.native_run(inputs)
    }
}

/// QUNN with trainable `p₁`, `p₂` (clamped to `[0, 1]`) and scalar skip
/// coefficients. The data-driven weights are not parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QunnModel {
    pub config: QunnConfig,
}

impl QunnModel {
    /// Empty skip lists are expanded to explicit unit scalars so that each
    /// layer's skip coefficient is trainable.
    pub fn new(mut config: QunnConfig) -> Result<Self> {
        if config.skip.is_empty() {
            config.skip = vec![SkipMap::default(); config.depth];
        }
        config.validate()?;
        Ok(QunnModel { config })
    }
}

fn schedule_values(p: &mut PSchedule) -> &mut [f64] {
    match p {
        PSchedule::Constant(v) => std::slice::from_mut(v),
        PSchedule::PerPosition(v) => v,
    }
}

fn skip_value(s: &mut SkipMap) -> Option<&mut f64> {
    match s {
        SkipMap::Scalar { value } | SkipMap::ClockShift { value } => Some(value),
        SkipMap::Full { .. } => None,
    }
}

impl Model for QunnModel {
    fn params(&self) -> Vec<f64> {
        let mut cfg = self.config.clone();
        let mut out = schedule_values(&mut cfg.p1).to_vec();
        out.extend_from_slice(schedule_values(&mut cfg.p2));
        out.extend(cfg.skip.iter_mut().filter_map(skip_value).map(|v| *v));
        out
    }

    fn with_params(&self, params: &[f64]) -> Result<Self> {
        check_count(self.params().len(), params.len())?;
        let mut cfg = self.config.clone();
        let mut it = params.iter().copied();
        for v in schedule_values(&mut cfg.p1)
            .iter_mut()
            .chain(schedule_values(&mut cfg.p2).iter_mut())
        {
            *v = it.next().unwrap_or_default().clamp(0.0, 1.0);
        }
        for v in cfg.skip.iter_mut().filter_map(skip_value) {
            *v = it.next().unwrap_or_default();
        }
        Ok(QunnModel { config: cfg })
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        qunn_forward(&self.config, inputs)
    }
}

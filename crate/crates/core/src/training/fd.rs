use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::vector;

/// Central-difference gradient `(L(p + δe_i) − L(p − δe_i)) / 2δ`.
/// Coordinates are evaluated in parallel; the result does not depend on the
/// thread count.
pub fn fd_gradient<F>(loss: F, params: &[f64], delta: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {delta}"
        )));
    }
    let center = loss(params)?;
    if !center.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    (0..params.len())
        .into_par_iter()
        .map(|i| {
            let mut p = params.to_vec();
            p[i] = params[i] + delta;
            let up = loss(&p)?;
            p[i] = params[i] - delta;
            let down = loss(&p)?;
            Ok((up - down) / (2.0 * delta))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    pub steps: usize,
    #[serde(default = "default_delta")]
    pub fd_delta: f64,
}

fn default_lr() -> f64 {
    1e-2
}

fn default_clip() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    1e-5
}

impl SgdConfig {
    pub fn with_steps(steps: usize) -> Self {
        SgdConfig {
            lr: default_lr(),
            clip_norm: default_clip(),
            steps,
            fd_delta: default_delta(),
        }
    }
}

/// Per-step record of a run. `losses[k]` and `grad_norms[k]` are measured at
/// the parameters before update `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub nan_flag: bool,
    /// Loss at the returned parameters (absent when the run halted on a
    /// non-finite value).
    pub final_loss: Option<f64>,
    pub params: Vec<f64>,
}

/// Clipped SGD on finite-difference gradients. A non-finite loss or gradient
/// sets `nan_flag` and stops the run with the last finite parameters.
pub fn sgd<F>(loss: F, init: &[f64], cfg: &SgdConfig) -> TrainTrace
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let mut params = init.to_vec();
    let mut trace = TrainTrace {
        losses: Vec::with_capacity(cfg.steps),
        grad_norms: Vec::with_capacity(cfg.steps),
        nan_flag: false,
        final_loss: None,
        params: Vec::new(),
    };
    let finite = |r: Result<f64>| r.ok().filter(|v| v.is_finite());
    let mut last_good = params.clone();
    for _ in 0..cfg.steps {
        let Some(l) = finite(loss(&params)) else {
            trace.nan_flag = true;
            params = std::mem::take(&mut last_good);
            break;
        };
        last_good.clone_from(&params);
        let grad = match fd_gradient(&loss, &params, cfg.fd_delta) {
            Ok(g) if vector::all_finite(&g) => g,
            _ => {
                trace.losses.push(l);
                trace.nan_flag = true;
                break;
            }
        };
        let norm = vector::norm(&grad);
        trace.losses.push(l);
        trace.grad_norms.push(norm);
        let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.lr * scale * g;
        }
    }
    if !trace.nan_flag {
        trace.final_loss = finite(loss(&params));
        if trace.final_loss.is_none() {
            trace.nan_flag = true;
            params = std::mem::take(&mut last_good);
        }
    }
    trace.params = params;
    trace
}

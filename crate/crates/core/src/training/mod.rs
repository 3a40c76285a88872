//! Finite-difference training harness, synthetic sequence tasks and the
//! correlation-length helper used to size QUNN blocks.

mod correlation;
mod fd;
mod models;
mod tasks;

pub use correlation::{autocorrelation, estimate_correlation_length, CorrelationEstimate};
pub use fd::{fd_gradient, sgd, SgdConfig, TrainTrace};
pub use models::{train_model, ArchModel, Model, OdeRnnModel, QunnModel};
pub use tasks::{
    constant_baseline, de_bruijn, de_bruijn_eval_sequence, delayed_copy_sequence, masked_mse, one_hot, uniform_one_hot_baseline, Sequence,
    Task, TaskData, TaskKind,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::random::{gaussian_matrix, gaussian_vec, rng_from_seed};
use crate::numerics::{Activation, Matrix, DEFAULT_PSD_TOL};
use crate::odernn::OdeRnnConfig;
use crate::stability::{certify_bn_stability, random_certified_config};

/// Feed-forward-in-time ODERNN for delayed copy: `β_k = I`, `γ_{n+1} = 0`,
/// `W_{n+1} = 0`, identity output, so the prediction after input `l` is
/// `h·Σ K_k` and depends only on `Y_l, …, Y_{l−t+1}`. Stage weights and
/// biases start as `init_scale`-sized Gaussians.
pub fn window_odernn(n: usize, t: usize, dim: usize, sigma: Activation, init_scale: f64, seed: u64) -> OdeRnnConfig {
    let mut rng = rng_from_seed(seed);
    let mut cfg = OdeRnnConfig::zeros(n, t, dim, dim);
    cfg.gamma[n] = Matrix::zeros(dim, dim);
    for q in 0..n {
        cfg.beta[q] = Matrix::identity(dim);
        cfg.activations[q] = sigma;
        cfg.w[q] = gaussian_matrix(&mut rng, dim, dim).scale(init_scale);
        cfg.b[q] = gaussian_vec(&mut rng, dim).iter().map(|v| v * init_scale).collect();
    }
    cfg
}

/// Outcome of training an ODERNN on delayed copy and scoring it on every
/// length-`lag` window of a de Bruijn sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkageRun {
    pub n: usize,
    pub t: usize,
    pub lag: usize,
    pub seed: u64,
    pub steps_run: usize,
    pub nan_flag: bool,
    pub train_loss: Option<f64>,
    pub eval_loss: f64,
    pub baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkageSetup {
    pub n: usize,
    pub t: usize,
    pub lag: usize,
    pub alphabet: usize,
    pub sigma: Activation,
    pub train_length: usize,
    pub sgd: SgdConfig,
}

pub fn memory_linkage_run(setup: &LinkageSetup, seed: u64) -> Result<LinkageRun> {
    let cfg = window_odernn(setup.n, setup.t, setup.alphabet, setup.sigma, 0.1, seed);
    let model = OdeRnnModel::new(cfg, false)?;
    let task = Task {
        kind: TaskKind::DelayedCopy {
            lag: setup.lag,
            alphabet: setup.alphabet,
        },
        length: setup.train_length,
        train_fraction: 0.75,
        seed,
    };
    let train = task.sequence()?;
    let (trained, trace) = train_model(&model, &train, &setup.sgd)?;
    let eval = de_bruijn_eval_sequence(setup.alphabet, setup.lag, setup.lag.max(setup.t));
    Ok(LinkageRun {
        n: setup.n,
        t: setup.t,
        lag: setup.lag,
        seed,
        steps_run: trace.losses.len(),
        nan_flag: trace.nan_flag,
        train_loss: trace.final_loss,
        eval_loss: trained.loss(&eval)?,
        baseline: constant_baseline(&eval)?,
    })
}

/// Trains the stage weights and biases of a certified random ODERNN on
/// delayed copy (`τ = 3`, alphabet 3). Returns the trace and whether the
/// initial config was certified.
pub fn stability_linkage_run(seed: u64, steps: usize) -> Result<(bool, TrainTrace)> {
    let mut rng = rng_from_seed(seed);
    let cfg = random_certified_config(&mut rng, 2, 3, Activation::Tanh)?;
    let certified = certify_bn_stability(&cfg, DEFAULT_PSD_TOL)?.certified;
    let task = Task {
        kind: TaskKind::DelayedCopy { lag: 3, alphabet: 3 },
        length: 48,
        train_fraction: 0.75,
        seed,
    };
    let data = task.generate()?;
    let (_, trace) = train_model(&OdeRnnModel::new(cfg, false)?, &data.train, &SgdConfig::with_steps(steps))?;
    Ok((certified, trace))
}

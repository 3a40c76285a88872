use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use odernn_core::adapters::{equivalence_check, map_to_odernn, random_inputs, random_spec, ArchSpec, Orders};
use odernn_core::clockham::{
    basis_state, build_h_tm, decode_basis, random_unitary_program, verify_ground_space, ClockProgram, GroundSpaceReport,
};
use odernn_core::numerics::random::{gaussian_vec, rng_from_seed};
use odernn_core::numerics::{cnorm, vector, Activation, Matrix, C64, DEFAULT_PSD_TOL};
use odernn_core::odernn::{convergence_order, odernn_rollout, rk_integrate, OdeRnnConfig, RkScheme, Tableau};
use odernn_core::qunn::{lstm_param_count, quadratic_fit, qunn_param_count, wrap_clock, PSchedule, Qunn, QunnConfig};
use odernn_core::stability::{certify_bn_stability, probe_many, random_certified_config, random_monotone_field, StabilityReport};
use odernn_core::training::{
    constant_baseline, estimate_correlation_length, train_model, window_odernn, ArchModel, CorrelationEstimate, Model, OdeRnnModel,
    QunnModel, SgdConfig, Task, TaskKind,
};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::output::{OutDir, Table};
use crate::svg::{line_plot, Axes, Series};
use crate::Common;

fn load_json<T: DeserializeOwned>(out: &mut OutDir, path: &Path) -> Result<T> {
    let text = out.read_input(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn named_tableau(name: &str) -> Option<Tableau> {
    Some(match name {
        "explicit_euler" | "euler" => Tableau::explicit_euler(),
        "implicit_midpoint" | "midpoint" => Tableau::implicit_midpoint(),
        "explicit_midpoint" => Tableau::explicit_midpoint(),
        "rk4" => Tableau::rk4(),
        "gauss2" => Tableau::gauss2(),
        _ => return None,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TableauRef {
    Named(String),
    Explicit(Tableau),
}

impl TableauRef {
    fn resolve(self) -> Result<Tableau> {
        match self {
            TableauRef::Explicit(t) => Ok(t),
            TableauRef::Named(n) => named_tableau(&n).with_context(|| format!("unknown tableau `{n}`")),
        }
    }
}

/// Runge–Kutta shorthand for a stability config.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RkConfigFile {
    tableau: TableauRef,
    field: Matrix,
    #[serde(default)]
    bias: Option<Vec<f64>>,
    #[serde(default)]
    activation: Activation,
    h: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StabilityInput {
    Rk(RkConfigFile),
    Full(Box<OdeRnnConfig>),
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    /// ODERNN config JSON, or the shorthand `{"tableau", "field", "bias"?, "activation"?, "h"}`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stages of the random certified config used without `--config`.
    #[arg(long, default_value_t = 2)]
    stages: usize,
    /// Dimension of the random certified config used without `--config`.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    probe_steps: usize,
    /// Number of perturbation probes; 0 skips probing.
    #[arg(long, default_value_t = 10)]
    probes: usize,
    /// Norm of the initial perturbation.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_PSD_TOL)]
    tol: f64,
}

pub fn stability(common: &Common, a: &StabilityArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let mut rng = rng_from_seed(common.seed);
    let cfg = match &a.config {
        Some(path) => match load_json::<StabilityInput>(&mut out, path)? {
            StabilityInput::Full(cfg) => *cfg,
            StabilityInput::Rk(rk) => {
                let bias = rk.bias.unwrap_or_else(|| vec![0.0; rk.field.rows()]);
                OdeRnnConfig::runge_kutta(&rk.tableau.resolve()?, &rk.field, &bias, rk.activation, rk.h)?
            }
        },
        None => random_certified_config(&mut rng, a.stages, a.dim, Activation::Tanh)?,
    };
    out.write_json("config.json", &cfg)?;
    let mut report: StabilityReport = certify_bn_stability(&cfg, a.tol)?;
    if a.probes > 0 {
        let y0 = gaussian_vec(&mut rng, cfg.s);
        let seeds: Vec<u64> = (0..a.probes).map(|_| rng.random()).collect();
        let summary = probe_many(&cfg, &y0, a.probe_steps, &seeds, a.delta)?;
        report.empirical_max_growth = Some(summary.max_ratio);
        report.probes_run = summary.probes_run;
        let mut table = Table::new(&["step", "max_ratio"]);
        for (i, r) in summary.envelope.iter().enumerate() {
            table.push(vec![i as f64, *r]);
        }
        out.write_table("probe_envelope", &table)?;
        let pts = summary.envelope.iter().enumerate().map(|(i, r)| (i as f64, *r)).collect();
        let plot = line_plot(
            "Perturbation growth (max over probes)",
            "step",
            "‖δ_l‖ / ‖δ_0‖",
            &[Series {
                name: "envelope",
                points: pts,
            }],
            Axes::default(),
        );
        out.write_bytes("probe_envelope.svg", plot.as_bytes())?;
    }
    out.write_json("stability_report.json", &report)?;
    out.finish("stability", args, common.seed)
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[arg(long, value_parser = ["lstm", "gru", "urnn", "cwrnn"])]
    arch: String,
    /// Architecture spec JSON; the `"arch"` tag may be omitted. Random if absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Layers of the random spec (clocks for cwrnn).
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
}

#[derive(Serialize)]
struct MappedReport<'a> {
    config: &'a OdeRnnConfig,
    claimed: Orders,
    realized: Orders,
}

fn load_arch_spec(out: &mut OutDir, path: &Path, arch: &str) -> Result<ArchSpec> {
    let mut value: serde_json::Value = load_json(out, path)?;
    let obj = value.as_object_mut().context("architecture spec must be a JSON object")?;
    match obj.get("arch").and_then(|v| v.as_str()) {
        Some(tag) if tag != arch => bail!("spec is tagged `{tag}` but --arch is `{arch}`"),
        Some(_) => {}
        None => {
            obj.insert("arch".into(), serde_json::Value::String(arch.into()));
        }
    }
    serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))
}

pub fn map(common: &Common, a: &MapArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let mut rng = rng_from_seed(common.seed);
    let spec = match &a.spec {
        Some(path) => load_arch_spec(&mut out, path, &a.arch)?,
        None => random_spec(&mut rng, &a.arch, a.layers, a.dim)?,
    };
    spec.validate()?;
    out.write_json("spec.json", &spec)?;
    let mapped = map_to_odernn(&spec)?;
    out.write_json(
        "mapped_config.json",
        &MappedReport {
            config: &mapped.config,
            claimed: mapped.claimed,
            realized: mapped.realized,
        },
    )?;
    let inputs = random_inputs(&mut rng, spec.input_dim(), a.steps);
    let report = equivalence_check(&spec, &inputs)?;
    let native = spec.native_run(&inputs)?;
    let via = mapped.run(&inputs)?;
    let mut table = Table::new(&["step", "deviation"]);
    for (i, (x, y)) in native.iter().zip(&via).enumerate() {
        table.push(vec![i as f64, vector::max_abs_diff(x, y)]);
    }
    out.write_table("deviation", &table)?;
    out.write_json("equivalence.json", &report)?;
    out.finish("map", args, common.seed)
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    /// Tableau name (explicit_euler, implicit_midpoint, explicit_midpoint, rk4, gauss2) or a tableau JSON file.
    #[arg(long, default_value = "rk4")]
    tableau: String,
    /// Square matrix JSON for the linear field `y' = A·y`. Random monotone if absent.
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
}

#[derive(Serialize)]
struct IntegrateReport {
    tableau: Tableau,
    dim: usize,
    steps: usize,
    h: f64,
    max_step_deviation: f64,
    deltas: Vec<f64>,
    errors: Vec<f64>,
    order_slope: f64,
}

pub const ORDER_DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

pub fn integrate(common: &Common, a: &IntegrateArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let mut rng = rng_from_seed(common.seed);
    let tab = match named_tableau(&a.tableau) {
        Some(t) => t,
        None => load_json::<TableauRef>(&mut out, Path::new(&a.tableau))?.resolve()?,
    };
    let field = match &a.system {
        Some(path) => load_json::<Matrix>(&mut out, path)?,
        None => random_monotone_field(&mut rng, a.dim, Activation::Identity),
    };
    if !field.is_square() {
        bail!("system matrix must be square, got {}x{}", field.rows(), field.cols());
    }
    let dim = field.rows();
    out.write_json("system.json", &field)?;
    let y0 = gaussian_vec(&mut rng, dim);
    let cfg = OdeRnnConfig::runge_kutta(&tab, &field, &vec![0.0; dim], Activation::Identity, a.h)?;
    let net = odernn_rollout(&cfg, &y0, a.steps)?;
    let scheme = RkScheme::from_tableau(&tab, dim, a.h);
    let direct = rk_integrate(&scheme, |y, _| field.matvec(y).expect("square field"), &y0, a.steps)?;

    let mut cols: Vec<String> = vec!["step".into()];
    cols.extend((0..dim).map(|i| format!("odernn_{i}")));
    cols.extend((0..dim).map(|i| format!("rk_{i}")));
    cols.push("deviation".into());
    let mut table = Table::with_columns(cols);
    let mut max_dev = 0.0f64;
    for (i, (x, y)) in net.iter().zip(&direct).enumerate() {
        let dev = vector::max_abs_diff(x, y);
        max_dev = max_dev.max(dev);
        let mut row = vec![i as f64];
        row.extend_from_slice(x);
        row.extend_from_slice(y);
        row.push(dev);
        table.push(row);
    }
    out.write_table("trajectory", &table)?;

    let (errors, slope) = convergence_order(&tab, &ORDER_DELTAS)?;
    let mut conv = Table::new(&["delta", "error"]);
    for (d, e) in ORDER_DELTAS.iter().zip(&errors) {
        conv.push(vec![*d, *e]);
    }
    out.write_table("convergence", &conv)?;
    let plot = line_plot(
        &format!("Global error on y' = -y (slope {slope:.3})"),
        "step size",
        "error at t = 1",
        &[Series {
            name: "error",
            points: ORDER_DELTAS.iter().copied().zip(errors.iter().copied()).collect(),
        }],
        Axes { log_x: true, log_y: true },
    );
    out.write_bytes("convergence.svg", plot.as_bytes())?;
    out.write_json(
        "integrate_report.json",
        &IntegrateReport {
            tableau: tab,
            dim,
            steps: a.steps,
            h: a.h,
            max_step_deviation: max_dev,
            deltas: ORDER_DELTAS.to_vec(),
            errors,
            order_slope: slope,
        },
    )?;
    out.finish("integrate", args, common.seed)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_parser = ["odernn", "lstm", "gru", "urnn", "cwrnn", "qunn"])]
    arch: String,
    /// Task name (delayed_copy, damped_oscillator, sine_prediction) or a task JSON file.
    #[arg(long, default_value = "delayed_copy")]
    task: String,
    /// Initial model JSON (ODERNN config, architecture spec or QUNN config). Random if absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    length: usize,
    #[arg(long, default_value_t = 3)]
    lag: usize,
    #[arg(long, default_value_t = 3)]
    alphabet: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    #[arg(long, default_value_t = 1e-5)]
    fd_delta: f64,
    /// Layers of random adapter specs (clocks for cwrnn, depth for qunn).
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// ODERNN stage count n.
    #[arg(long, default_value_t = 2)]
    stages: usize,
    /// ODERNN memory order t; defaults to the task lag for delayed copy and 2 otherwise.
    #[arg(long)]
    memory: Option<usize>,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    arch: &'a str,
    task: &'a Task,
    param_count: usize,
    sgd: &'a SgdConfig,
    steps_run: usize,
    nan_flag: bool,
    initial_loss: Option<f64>,
    final_train_loss: Option<f64>,
    test_loss: Option<f64>,
    test_constant_baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlation: Option<&'a CorrelationEstimate>,
}

fn task_from_args(out: &mut OutDir, a: &TrainArgs, seed: u64) -> Result<Task> {
    let kind = match a.task.as_str() {
        "delayed_copy" => TaskKind::DelayedCopy {
            lag: a.lag,
            alphabet: a.alphabet,
        },
        "damped_oscillator" => TaskKind::DampedOscillator {
            omega: 1.0,
            zeta: 0.1,
            dt: 0.1,
        },
        "sine_prediction" => TaskKind::SinePrediction { period: 8.0 },
        path => {
            let task: Task = load_json(out, Path::new(path))?;
            task.validate()?;
            return Ok(task);
        }
    };
    let task = Task {
        kind,
        length: a.length,
        train_fraction: 0.75,
        seed,
    };
    task.validate()?;
    Ok(task)
}

struct TrainContext<'a> {
    arch: &'a str,
    task: &'a Task,
    sgd: SgdConfig,
    correlation: Option<CorrelationEstimate>,
}

fn run_training<M: Model + Serialize>(out: &mut OutDir, ctx: &TrainContext, model: M) -> Result<()> {
    let data = ctx.task.generate()?;
    if model.predict(&data.train.inputs[..1])?[0].len() != ctx.task.dim() {
        bail!("model output dimension does not match the task dimension {}", ctx.task.dim());
    }
    out.write_json("initial_model.json", &model)?;
    let (trained, trace) = train_model(&model, &data.train, &ctx.sgd)?;
    out.write_json("trained_model.json", &trained)?;
    let mut table = Table::new(&["step", "loss", "grad_norm"]);
    for (i, l) in trace.losses.iter().enumerate() {
        table.push(vec![i as f64, *l, trace.grad_norms.get(i).copied().unwrap_or(f64::NAN)]);
    }
    out.write_table("metrics", &table)?;
    let plot = line_plot(
        &format!("{} training loss", ctx.arch),
        "step",
        "train MSE",
        &[Series {
            name: "loss",
            points: trace.losses.iter().enumerate().map(|(i, l)| (i as f64, *l)).collect(),
        }],
        Axes { log_x: false, log_y: true },
    );
    out.write_bytes("loss.svg", plot.as_bytes())?;
    let test_loss = if trace.nan_flag {
        None
    } else {
        trained.loss(&data.test).ok().filter(|v| v.is_finite())
    };
    out.write_json(
        "summary.json",
        &TrainSummary {
            arch: ctx.arch,
            task: ctx.task,
            param_count: model.params().len(),
            sgd: &ctx.sgd,
            steps_run: trace.losses.len(),
            nan_flag: trace.nan_flag,
            initial_loss: trace.losses.first().copied(),
            final_train_loss: trace.final_loss,
            test_loss,
            test_constant_baseline: constant_baseline(&data.test)?,
            correlation: ctx.correlation.as_ref(),
        },
    )
}

pub fn train(common: &Common, a: &TrainArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let task = task_from_args(&mut out, a, common.seed)?;
    out.write_json("task.json", &task)?;
    let dim = task.dim();
    let mut rng = rng_from_seed(common.seed ^ 0x5eed_0f_a11_u64);
    let mut ctx = TrainContext {
        arch: &a.arch,
        task: &task,
        sgd: SgdConfig {
            lr: a.lr,
            clip_norm: a.clip,
            steps: a.steps,
            fd_delta: a.fd_delta,
        },
        correlation: None,
    };
    match a.arch.as_str() {
        "odernn" => {
            let cfg = match &a.model {
                Some(p) => load_json(&mut out, p)?,
                None => {
                    let t = a.memory.unwrap_or(match task.kind {
                        TaskKind::DelayedCopy { lag, .. } => lag,
                        _ => 2,
                    });
                    window_odernn(a.stages, t, dim, Activation::Tanh, 0.1, rng.random())
                }
            };
            run_training(&mut out, &ctx, OdeRnnModel::new(cfg, false)?)?;
        }
        "qunn" => {
            let cfg = match &a.model {
                Some(p) => load_json(&mut out, p)?,
                None => {
                    let est = estimate_correlation_length(&task.generate()?.train.inputs)?;
                    let mut cfg = QunnConfig::all_off(est.estimate, a.layers, dim);
                    cfg.p1 = PSchedule::Constant(0.5);
                    cfg.p2 = PSchedule::Constant(0.5);
                    ctx.correlation = Some(est);
                    cfg
                }
            };
            run_training(&mut out, &ctx, QunnModel::new(cfg)?)?;
        }
        arch => {
            let spec = match &a.model {
                Some(p) => load_arch_spec(&mut out, p, arch)?,
                None => random_spec(&mut rng, arch, a.layers, dim)?,
            };
            run_training(&mut out, &ctx, ArchModel::new(spec)?)?;
        }
    }
    out.finish("train", args, common.seed)
}

#[derive(Args, Debug)]
pub struct ClockhamArgs {
    /// Clock program JSON (unitary, rank_one or boolean mode). Random unitary if absent.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Number of program steps of the random program.
    #[arg(long, default_value_t = 3)]
    clock_steps: usize,
    /// Data dimension of the random program.
    #[arg(long, default_value_t = 2)]
    data_dim: usize,
    /// Basis index of the initial data state.
    #[arg(long, default_value_t = 0)]
    input: usize,
}

#[derive(Serialize)]
struct ClockhamReport {
    hamiltonian_dim: usize,
    clock_steps: usize,
    data_dim: usize,
    input: usize,
    ground: GroundSpaceReport,
    direct_output: Vec<C64>,
    readout_deviation: f64,
    decoded_readout: Option<usize>,
}

pub fn clockham(common: &Common, a: &ClockhamArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let mut rng = rng_from_seed(common.seed);
    let prog: ClockProgram = match &a.program {
        Some(p) => load_json(&mut out, p)?,
        None => random_unitary_program(&mut rng, a.clock_steps, a.data_dim),
    };
    prog.validate()?;
    out.write_json("program.json", &prog)?;
    let d = prog.data_dim();
    if a.input >= d {
        bail!("input index {} out of range for data dimension {d}", a.input);
    }
    let initial = basis_state(a.input, d);
    let ch = build_h_tm(&prog)?;
    let ground = verify_ground_space(&ch, &prog, &initial)?;
    let mut direct = initial.clone();
    for u in prog.operators() {
        direct = u.matvec(&direct)?;
    }
    let diff: Vec<C64> = direct.iter().zip(&ground.readout).map(|(x, y)| x - y).collect();
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (i, e) in ch.spectrum.iter().enumerate() {
        table.push(vec![i as f64, *e]);
    }
    out.write_table("spectrum", &table)?;
    let plot = line_plot(
        "Clock Hamiltonian spectrum",
        "index",
        "eigenvalue",
        &[Series {
            name: "spectrum",
            points: ch.spectrum.iter().enumerate().map(|(i, e)| (i as f64, *e)).collect(),
        }],
        Axes::default(),
    );
    out.write_bytes("spectrum.svg", plot.as_bytes())?;
    let report = ClockhamReport {
        hamiltonian_dim: ch.h.rows(),
        clock_steps: prog.steps(),
        data_dim: d,
        input: a.input,
        decoded_readout: decode_basis(&ground.readout, 1e-9),
        readout_deviation: cnorm(&diff),
        direct_output: direct,
        ground,
    };
    out.write_json("clockham_report.json", &report)?;
    out.finish("clockham", args, common.seed)
}

#[derive(Args, Debug)]
pub struct QunnDemoArgs {
    /// QUNN config JSON. Without it the block length is estimated from the input series.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Period of the sinusoidal input series.
    #[arg(long, default_value_t = 8.0)]
    period: f64,
    #[arg(long, default_value_t = 48)]
    length: usize,
    /// Hidden layers of the default config.
    #[arg(long, default_value_t = 2)]
    depth: usize,
}

#[derive(Serialize)]
struct QunnReport<'a> {
    config: &'a QunnConfig,
    correlation: CorrelationEstimate,
    max_antisymmetry: f64,
    all_off_max_deviation: f64,
    param_fit_qunn: [f64; 3],
    param_fit_lstm: [f64; 3],
}

pub const PARAM_SWEEP: [usize; 4] = [2, 4, 8, 16];

pub fn qunn_demo(common: &Common, a: &QunnDemoArgs, args: &[String]) -> Result<Vec<String>> {
    let mut out = OutDir::create(&common.out, common.format)?;
    let mut rng = rng_from_seed(common.seed);
    let given: Option<QunnConfig> = a.config.as_ref().map(|p| load_json(&mut out, p)).transpose()?;
    let s = given.as_ref().map_or(1, |c| c.s);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let series: Vec<Vec<f64>> = (0..a.length)
        .map(|k| {
            (0..s)
                .map(|c| (std::f64::consts::TAU * k as f64 / a.period + phase + c as f64).sin())
                .collect()
        })
        .collect();
    let correlation = estimate_correlation_length(&series)?;
    let cfg = match given {
        Some(c) => c,
        None => {
            let mut c = QunnConfig::all_off(correlation.estimate, a.depth, s);
            c.p1 = PSchedule::Constant(0.5);
            c.p2 = PSchedule::Constant(0.5);
            c
        }
    };
    cfg.validate()?;
    out.write_json("qunn_config.json", &cfg)?;

    let mut q = Qunn::new(cfg.clone())?;
    let mut cols: Vec<String> = vec!["step".into(), "clock".into()];
    cols.extend((0..s).map(|c| format!("input_{c}")));
    cols.extend((0..s).map(|c| format!("output_{c}")));
    let mut outputs = Table::with_columns(cols);
    let mut max_antisymmetry = 0.0f64;
    for (i, y) in series.iter().enumerate() {
        let tr = q.feed_traced(y)?;
        for w in &tr.weights {
            max_antisymmetry = max_antisymmetry.max(w.skew_residual());
        }
        let mut row = vec![i as f64, tr.l as f64];
        row.extend_from_slice(y);
        row.extend_from_slice(&tr.output);
        outputs.push(row);
    }
    out.write_table("outputs", &outputs)?;

    let mut off = QunnConfig::all_off(cfg.clock_dim, cfg.depth, s);
    off.sigma_embed = cfg.sigma_embed;
    off.sigma_out = cfg.sigma_out;
    let mut q_off = Qunn::new(off.clone())?;
    let mut all_off_max_deviation = 0.0f64;
    for y in &series {
        let l = q_off.position();
        let got = q_off.feed(y)?;
        let expected = if wrap_clock(l + 1, off.clock_dim) == l {
            off.sigma_out.apply(&off.sigma_embed.apply(y))
        } else {
            vec![off.sigma_out.eval(0.0); s]
        };
        all_off_max_deviation = all_off_max_deviation.max(vector::max_abs_diff(&got, &expected));
    }

    let mut counts = Table::new(&["n", "qunn_params", "lstm_params"]);
    for &n in &PARAM_SWEEP {
        let qc = qunn_param_count(&QunnConfig::all_off(n, n, s)) as f64;
        counts.push(vec![n as f64, qc, lstm_param_count(n, 1) as f64]);
    }
    out.write_table("param_counts", &counts)?;
    let ns = counts.column("n");
    let plot = line_plot(
        "Trainable parameters against block length",
        "N",
        "parameters",
        &[
            Series {
                name: "QUNN (depth N)",
                points: ns.iter().copied().zip(counts.column("qunn_params")).collect(),
            },
            Series {
                name: "LSTM (hidden N)",
                points: ns.iter().copied().zip(counts.column("lstm_params")).collect(),
            },
        ],
        Axes { log_x: true, log_y: true },
    );
    out.write_bytes("param_counts.svg", plot.as_bytes())?;
    let report = QunnReport {
        config: &cfg,
        correlation,
        max_antisymmetry,
        all_off_max_deviation,
        param_fit_qunn: quadratic_fit(&ns, &counts.column("qunn_params"))?,
        param_fit_lstm: quadratic_fit(&ns, &counts.column("lstm_params"))?,
    };
    out.write_json("qunn_report.json", &report)?;
    out.finish("qunn-demo", args, common.seed)
}

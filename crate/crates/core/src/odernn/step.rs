use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::config::OdeRnnConfig;
use super::history::InputHistory;

/// Relaxation used once plain fixed-point iteration stops shrinking the residual.
pub const FIXED_POINT_DAMPING: f64 = 0.5;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_CAP: usize = 100;

/// Supplies the step parameters of a dynamical-weight ODERNN.
///
/// `prepare` runs before every step and may rewrite any weight in `params`
/// (dimensions must stay fixed); `observe` sees the stage values and the
/// produced output afterwards, so the schedule can carry recurrent memory.
pub trait WeightSchedule {
    fn prepare(&mut self, step: usize, hist: &InputHistory, params: &mut OdeRnnConfig) -> Result<()>;

    fn observe(&mut self, _hiddens: &[Vec<f64>], _y_next: &[f64]) {}

    fn reset(&mut self) {}
}

/// The default schedule: weights never change.
#[derive(Clone, Copy, Debug, Default)]
pub struct StaticWeights;

impl WeightSchedule for StaticWeights {
    fn prepare(&mut self, _: usize, _: &InputHistory, _: &mut OdeRnnConfig) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Lin {
    Zero,
    Scaled(f64),
    Dense,
}

impl Lin {
    fn of(m: &Matrix) -> Lin {
        match m.as_scaled_identity() {
            Some(0.0) => Lin::Zero,
            Some(s) => Lin::Scaled(s),
            None if m.is_zero() => Lin::Zero,
            None => Lin::Dense,
        }
    }

    /// `out += s·M·x`
    #[inline]
    fn apply_add(self, m: &Matrix, s: f64, x: &[f64], out: &mut [f64]) {
        match self {
            Lin::Zero => {}
            Lin::Scaled(c) => {
                let f = s * c;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += f * xi;
                }
            }
            Lin::Dense => m.matvec_scaled_add_into(s, x, out),
        }
    }
}

/// Per-step structure of the parameters, used to skip zero and identity blocks.
#[derive(Clone, Debug)]
struct Plan {
    delays: Vec<usize>,
    w: Vec<Lin>,
    alpha: Vec<Vec<Lin>>,
    beta: Vec<Lin>,
    gamma: Vec<Lin>,
    kappa: Vec<Lin>,
    explicit: bool,
}

impl Plan {
    fn new(cfg: &OdeRnnConfig) -> Plan {
        Plan {
            delays: cfg.delays(),
            w: cfg.w.iter().map(Lin::of).collect(),
            alpha: cfg.alpha.iter().map(|r| r.iter().map(Lin::of).collect()).collect(),
            beta: cfg.beta.iter().map(Lin::of).collect(),
            gamma: cfg.gamma.iter().map(Lin::of).collect(),
            kappa: cfg.kappa.iter().map(Lin::of).collect(),
            explicit: cfg.is_explicit(),
        }
    }
}

#[derive(Clone, Debug)]
struct Workspace {
    base: Vec<f64>,
    k: Vec<f64>,
    g: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    pre_out: Vec<f64>,
    y_next: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, s: usize, p: usize) -> Self {
        Workspace {
            base: vec![0.0; n * p],
            k: vec![0.0; n * p],
            g: vec![0.0; n * p],
            u: vec![0.0; p],
            v: vec![0.0; p],
            pre_out: vec![0.0; s],
            y_next: vec![0.0; s],
        }
    }
}

/// Stage `q` (0-based) evaluated against the stage values `k`, written to `out`.
#[inline]
fn eval_stage(cfg: &OdeRnnConfig, plan: &Plan, base: &[f64], k: &[f64], q: usize, u: &mut [f64], v: &mut [f64], out: &mut [f64]) {
    let p = cfg.p;
    u.copy_from_slice(&base[q * p..(q + 1) * p]);
    for (j, lin) in plan.alpha[q].iter().enumerate() {
        lin.apply_add(&cfg.alpha[q][j], cfg.h, &k[j * p..(j + 1) * p], u);
    }
    let sigma = cfg.activations[q];
    let act: &mut [f64] = match cfg.inner_map(q) {
        Some(m) => {
            v.fill(0.0);
            m.matvec_add_into(u, v);
            v
        }
        None => u,
    };
    sigma.apply_in_place(act);
    out.fill(0.0);
    plan.kappa[q].apply_add(&cfg.kappa[q], 1.0, act, out);
    if q > 0 {
        plan.gamma[q].apply_add(&cfg.gamma[q], 1.0, &k[(q - 1) * p..q * p], out);
    }
}

/// Runs one step against `hist`, leaving stage values in `ws.k` and the output in `ws.y_next`.
/// Returns the number of fixed-point iterations used (0 in explicit mode).
fn step_into(cfg: &OdeRnnConfig, plan: &Plan, ws: &mut Workspace, hist: &InputHistory) -> Result<usize> {
    let (n, p) = (cfg.n, cfg.p);
    for q in 0..n {
        let dst = &mut ws.base[q * p..(q + 1) * p];
        dst.copy_from_slice(&cfg.b[q]);
        plan.w[q].apply_add(&cfg.w[q], 1.0, hist.get(plan.delays[q]), dst);
    }

    // Sequential pass: exact in explicit mode, the initial guess otherwise.
    if !plan.explicit {
        ws.k.fill(0.0);
    }
    for q in 0..n {
        let mut out = std::mem::take(&mut ws.g);
        eval_stage(cfg, plan, &ws.base, &ws.k, q, &mut ws.u, &mut ws.v, &mut out[q * p..(q + 1) * p]);
        ws.k[q * p..(q + 1) * p].copy_from_slice(&out[q * p..(q + 1) * p]);
        ws.g = out;
    }

    let mut iterations = 0;
    if !plan.explicit {
        let mut residual = f64::INFINITY;
        let mut damping = 1.0;
        loop {
            if iterations == FIXED_POINT_CAP {
                return Err(Error::ImplicitNoConvergence { iterations, residual });
            }
            iterations += 1;
            let mut g = std::mem::take(&mut ws.g);
            for q in 0..n {
                eval_stage(cfg, plan, &ws.base, &ws.k, q, &mut ws.u, &mut ws.v, &mut g[q * p..(q + 1) * p]);
            }
            let previous_residual = residual;
            residual = 0.0;
            let mut size: f64 = 1.0;
            for (a, b) in ws.k.iter().zip(&g) {
                residual = residual.max((a - b).abs());
                size = size.max(a.abs());
            }
            if !residual.is_finite() {
                ws.g = g;
                return Err(Error::ImplicitNoConvergence { iterations, residual });
            }
            if residual <= FIXED_POINT_TOL * size {
                ws.k.copy_from_slice(&g);
                ws.g = g;
                break;
            }
            if residual >= previous_residual {
                damping = FIXED_POINT_DAMPING;
            }
            for (a, b) in ws.k.iter_mut().zip(&g) {
                *a = (1.0 - damping) * *a + damping * b;
            }
            ws.g = g;
        }
    }

    let last = n;
    ws.pre_out.copy_from_slice(&cfg.b[last]);
    plan.w[last].apply_add(&cfg.w[last], 1.0, hist.get(plan.delays[n - 1]), &mut ws.pre_out);
    for j in 0..n {
        plan.beta[j].apply_add(&cfg.beta[j], cfg.h, &ws.k[j * p..(j + 1) * p], &mut ws.pre_out);
    }
    cfg.activations[last].apply_in_place(&mut ws.pre_out);
    ws.y_next.fill(0.0);
    plan.kappa[last].apply_add(&cfg.kappa[last], 1.0, &ws.pre_out, &mut ws.y_next);
    plan.gamma[last].apply_add(&cfg.gamma[last], 1.0, hist.get(0), &mut ws.y_next);
    Ok(iterations)
}

/// Output of a single step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub y_next: Vec<f64>,
    pub hiddens: Vec<Vec<f64>>,
}

fn split_hiddens(k: &[f64], p: usize) -> Vec<Vec<f64>> {
    k.chunks(p.max(1)).map(<[f64]>::to_vec).collect()
}

/// One step against an explicit history, with the config's weights as given.
pub fn odernn_step(cfg: &OdeRnnConfig, hist: &InputHistory) -> Result<StepOutput> {
    cfg.validate()?;
    if hist.dim() != cfg.s {
        return Err(Error::dims("history dim", cfg.s, hist.dim()));
    }
    if hist.capacity() < cfg.t + 1 {
        return Err(Error::dims("history length", cfg.t + 1, hist.capacity()));
    }
    let plan = Plan::new(cfg);
    let mut ws = Workspace::new(cfg.n, cfg.s, cfg.p);
    step_into(cfg, &plan, &mut ws, hist)?;
    Ok(StepOutput {
        y_next: ws.y_next,
        hiddens: split_hiddens(&ws.k, cfg.p),
    })
}

/// Stateful ODERNN: owns the history, the working parameters and scratch space.
#[derive(Clone, Debug)]
pub struct OdeRnn<S: WeightSchedule = StaticWeights> {
    params: OdeRnnConfig,
    schedule: S,
    plan: Plan,
    ws: Workspace,
    history: InputHistory,
    step: usize,
    last_iterations: usize,
    dynamic: bool,
}

impl OdeRnn<StaticWeights> {
    pub fn new(cfg: OdeRnnConfig) -> Result<Self> {
        Self::build(cfg, StaticWeights, false)
    }
}

impl<S: WeightSchedule> OdeRnn<S> {
    pub fn with_schedule(cfg: OdeRnnConfig, schedule: S) -> Result<Self> {
        Self::build(cfg, schedule, true)
    }

    fn build(cfg: OdeRnnConfig, schedule: S, dynamic: bool) -> Result<Self> {
        cfg.validate()?;
        let plan = Plan::new(&cfg);
        let ws = Workspace::new(cfg.n, cfg.s, cfg.p);
        let history = InputHistory::new(cfg.t, cfg.s, cfg.padding);
        Ok(OdeRnn {
            params: cfg,
            schedule,
            plan,
            ws,
            history,
            step: 0,
            last_iterations: 0,
            dynamic,
        })
    }

    pub fn params(&self) -> &OdeRnnConfig {
        &self.params
    }

    pub fn schedule(&self) -> &S {
        &self.schedule
    }

    pub fn history(&self) -> &InputHistory {
        &self.history
    }

    /// Flat stage values `K_1 ‖ … ‖ K_n` of the last step.
    pub fn hiddens(&self) -> &[f64] {
        &self.ws.k
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.schedule.reset();
        self.step = 0;
    }

    /// Pushes `y` as `Y_l` and returns `Y_{l+1}`.
    pub fn feed(&mut self, y: &[f64]) -> Result<&[f64]> {
        if y.len() != self.params.s {
            return Err(Error::dims("input dim", self.params.s, y.len()));
        }
        self.history.push(y);
        if self.dynamic {
            self.schedule.prepare(self.step, &self.history, &mut self.params)?;
            self.params.validate()?;
            self.plan = Plan::new(&self.params);
        }
        self.last_iterations = step_into(&self.params, &self.plan, &mut self.ws, &self.history)?;
        if self.dynamic {
            let hiddens = split_hiddens(&self.ws.k, self.params.p);
            self.schedule.observe(&hiddens, &self.ws.y_next);
        }
        self.step += 1;
        Ok(&self.ws.y_next)
    }

    /// Teacher-forced run: output `i` is the prediction made after reading input `i`.
    pub fn run(&mut self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.feed(x).map(<[f64]>::to_vec)).collect()
    }

    /// Autonomous run feeding each output back as the next input; returns
    /// `steps + 1` states starting with `y0`.
    pub fn rollout(&mut self, y0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(y0.to_vec());
        let mut y = y0.to_vec();
        for _ in 0..steps {
            let next = self.feed(&y)?;
            y.copy_from_slice(next);
            out.push(y.clone());
        }
        Ok(out)
    }
}

/// Teacher-forced run of a static-weight config; output length equals input length.
pub fn odernn_run(cfg: &OdeRnnConfig, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("input sequence is empty".into()));
    }
    OdeRnn::new(cfg.clone())?.run(inputs)
}

/// Teacher-forced run with a weight schedule.
pub fn odernn_run_with<S: WeightSchedule>(cfg: &OdeRnnConfig, schedule: S, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("input sequence is empty".into()));
    }
    OdeRnn::with_schedule(cfg.clone(), schedule)?.run(inputs)
}

/// Autonomous trajectory of length `steps + 1`.
pub fn odernn_rollout(cfg: &OdeRnnConfig, y0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    OdeRnn::new(cfg.clone())?.rollout(y0, steps)
}

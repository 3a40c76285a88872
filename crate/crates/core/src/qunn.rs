//! The clock-embedded recurrent network with data-driven antisymmetric weights.
//!
//! Hidden vectors have dimension `s·N` and are stored clock-major: the data
//! vector attached to clock `j` (1-based) occupies entries `(j−1)·s..j·s`. A
//! data/clock product written `A ⊗ B` (data factor first) is therefore built
//! as `kron(B, A)` here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kron, Activation, Matrix};

/// `e_l` in `R^N` for `1 ≤ l ≤ N`.
pub fn clock_state(l: usize, n: usize) -> Result<Vec<f64>> {
    if l == 0 || l > n {
        return Err(Error::OutOfRange { index: l, max: n });
    }
    let mut c = vec![0.0; n];
    c[l - 1] = 1.0;
    Ok(c)
}

/// `σ₁(Y ⊗ c_l)`.
pub fn qunn_embed(y: &[f64], l: usize, n: usize, sigma: Activation) -> Result<Vec<f64>> {
    clock_state(l, n)?;
    let s = y.len();
    let mut k = vec![0.0; s * n];
    k[(l - 1) * s..l * s].copy_from_slice(y);
    sigma.apply_in_place(&mut k);
    Ok(k)
}

/// Clock index `j` wrapped into `1..=N`.
pub fn wrap_clock(j: usize, n: usize) -> usize {
    (j - 1) % n + 1
}

/// `σ_{L+1}((I ⊗ c_jᵀ)·K)`: the data block at clock `j` (wrapped into `1..=N`).
pub fn qunn_project(k: &[f64], clock: usize, s: usize, n: usize, sigma: Activation) -> Result<Vec<f64>> {
    if k.len() != s * n {
        return Err(Error::dims("qunn hidden vector", s * n, k.len()));
    }
    if clock == 0 {
        return Err(Error::OutOfRange { index: 0, max: n });
    }
    let j = wrap_clock(clock, n);
    Ok(sigma.apply(&k[(j - 1) * s..j * s]))
}

/// `|e_a⟩⟨e_b|` on the clock space, or the zero matrix when either index is
/// outside `1..=N` (history before the block start).
fn clock_outer(a: Option<usize>, b: usize, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    if let Some(a) = a {
        m.set(a - 1, b - 1, 1.0);
    }
    m
}

fn history_index(l: usize, k: usize) -> Option<usize> {
    (l > k).then(|| l - k)
}

/// `(1 − p₁)·I + p₁·[I ⊗ c_{l−k}c_lᵀ − I ⊗ c_l c_{l−k}ᵀ]`.
pub fn clock_reorder(l: usize, k: usize, s: usize, n: usize, p1: f64) -> Result<Matrix> {
    clock_state(l, n)?;
    let back = history_index(l, k);
    let swap = clock_outer(back, l, n).try_sub(&clock_outer(back, l, n).transpose())?;
    let id = Matrix::identity(s);
    Ok(&Matrix::scaled_identity(s * n, 1.0 - p1) + &kron(&swap, &id).scale(p1))
}

/// One step of the weight recursion:
/// `W_l^k = (1 − p₂)·W_l^{k−1} + p₂·[(Y_{l−k}Y_lᵀ) ⊗ c_{l−k}c_lᵀ − (Y_lY_{l−k}ᵀ) ⊗ c_l c_{l−k}ᵀ]`.
/// `block[j − 1]` is `Y_j` of the current block; `Y_{l−k}` with `l − k < 1`
/// is the zero vector.
pub fn qunn_weight_update(w_prev: &Matrix, block: &[Vec<f64>], l: usize, k: usize, n: usize, p2: f64) -> Result<Matrix> {
    clock_state(l, n)?;
    let y_l = block.get(l - 1).ok_or(Error::OutOfRange {
        index: l,
        max: block.len(),
    })?;
    let s = y_l.len();
    if w_prev.shape() != (s * n, s * n) {
        return Err(Error::dims("qunn W_l^{k-1}", s * n, w_prev.rows()));
    }
    let mut w = w_prev.scale(1.0 - p2);
    if let Some(j) = history_index(l, k) {
        let y_j = &block[j - 1];
        if y_j.len() != s {
            return Err(Error::dims("qunn block input", s, y_j.len()));
        }
        // Blocks (j, l) and (l, j) of the clock-major layout.
        for a in 0..s {
            for b in 0..s {
                let forward = p2 * y_j[a] * y_l[b];
                let r = (j - 1) * s + a;
                let c = (l - 1) * s + b;
                w.set(r, c, w.get(r, c) + forward);
                w.set(c, r, w.get(c, r) - forward);
            }
        }
    }
    Ok(w)
}

/// Per-position coefficient in `[0, 1]`: either one scalar or one value per
/// clock position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PSchedule {
    Constant(f64),
    PerPosition(Vec<f64>),
}

impl PSchedule {
    pub fn at(&self, l: usize) -> f64 {
        match self {
            PSchedule::Constant(p) => *p,
            PSchedule::PerPosition(v) => v[l - 1],
        }
    }

    fn validate(&self, name: &str, n: usize) -> Result<()> {
        let vals: &[f64] = match self {
            PSchedule::Constant(p) => std::slice::from_ref(p),
            PSchedule::PerPosition(v) => {
                if v.len() != n {
                    return Err(Error::InvalidConfig(format!("{name} has {} positions, expected {n}", v.len())));
                }
                v
            }
        };
        if vals.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        match self {
            PSchedule::Constant(_) => 1,
            PSchedule::PerPosition(v) => v.len(),
        }
    }
}

/// The skip map `S_k` in front of the previous hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkipMap {
    /// `value·I`.
    Scalar {
        value: f64,
    },
    /// `value·(P ⊗ I)` where `P` moves clock `j` to clock `j + 1` (wrapping).
    ClockShift {
        value: f64,
    },
    Full {
        matrix: Matrix,
    },
}

impl Default for SkipMap {
    fn default() -> Self {
        SkipMap::Scalar { value: 1.0 }
    }
}

impl SkipMap {
    fn apply(&self, k: &[f64], s: usize, n: usize) -> Result<Vec<f64>> {
        Ok(match self {
            SkipMap::Scalar { value } => k.iter().map(|x| value * x).collect(),
            SkipMap::ClockShift { value } => {
                let mut out = vec![0.0; s * n];
                for j in 0..n {
                    let to = (j + 1) % n;
                    for a in 0..s {
                        out[to * s + a] = value * k[j * s + a];
                    }
                }
                out
            }
            SkipMap::Full { matrix } => matrix.matvec(k)?,
        })
    }

    /// Dense form of the map.
    pub fn matrix(&self, s: usize, n: usize) -> Matrix {
        match self {
            SkipMap::Scalar { value } => Matrix::scaled_identity(s * n, *value),
            SkipMap::ClockShift { value } => {
                let shift = Matrix::from_fn(n, n, |r, c| if r == (c + 1) % n { *value } else { 0.0 });
                kron(&shift, &Matrix::identity(s))
            }
            SkipMap::Full { matrix } => matrix.clone(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            SkipMap::Scalar { .. } | SkipMap::ClockShift { .. } => 1,
            SkipMap::Full { matrix } => matrix.rows() * matrix.cols(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QunnConfig {
    /// Block length `N` (temporal correlation length).
    pub clock_dim: usize,
    /// Number of hidden layers `L`.
    pub depth: usize,
    /// Data dimension `s`.
    pub s: usize,
    pub p1: PSchedule,
    pub p2: PSchedule,
    /// `S_1..S_L`; empty means identity for every layer.
    #[serde(default)]
    pub skip: Vec<SkipMap>,
    #[serde(default)]
    pub sigma_embed: Activation,
    #[serde(default = "default_hidden")]
    pub sigma_hidden: Activation,
    #[serde(default)]
    pub sigma_out: Activation,
    /// Antisymmetric `W_l^0`; `None` means zero.
    #[serde(default)]
    pub w_base: Option<Matrix>,
}

fn default_hidden() -> Activation {
    Activation::Tanh
}

impl QunnConfig {
    /// The configuration with every coefficient off: `p₁ = p₂ = 0`, zero base,
    /// identity skips, tanh hidden activation.
    pub fn all_off(clock_dim: usize, depth: usize, s: usize) -> Self {
        QunnConfig {
            clock_dim,
            depth,
            s,
            p1: PSchedule::Constant(0.0),
            p2: PSchedule::Constant(0.0),
            skip: Vec::new(),
            sigma_embed: Activation::Identity,
            sigma_hidden: Activation::Tanh,
            sigma_out: Activation::Identity,
            w_base: None,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.s * self.clock_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.clock_dim == 0 || self.depth == 0 || self.s == 0 {
            return Err(Error::InvalidConfig("qunn needs N, L and s at least 1".into()));
        }
        self.p1.validate("p1", self.clock_dim)?;
        self.p2.validate("p2", self.clock_dim)?;
        let d = self.hidden_dim();
        if !self.skip.is_empty() && self.skip.len() != self.depth {
            return Err(Error::dims("qunn skip maps", self.depth, self.skip.len()));
        }
        for sk in &self.skip {
            if let SkipMap::Full { matrix } = sk {
                if matrix.shape() != (d, d) {
                    return Err(Error::dims("qunn S_k", d, matrix.rows()));
                }
            }
        }
        if let Some(w) = &self.w_base {
            if w.shape() != (d, d) {
                return Err(Error::dims("qunn W_base", d, w.rows()));
            }
            let r = w.skew_residual();
            if r > 1e-12 * w.max_abs().max(1.0) {
                return Err(Error::NotSkew(r));
            }
        }
        Ok(())
    }

    fn skip_map(&self, k: usize) -> SkipMap {
        self.skip.get(k - 1).cloned().unwrap_or_default()
    }
}

/// `S_k·K^{k−1} + σ₂(D_l^k·W_l^k·K^{k−1})`.
pub fn qunn_hidden_step(cfg: &QunnConfig, k_prev: &[f64], l: usize, k: usize, w_lk: &Matrix) -> Result<Vec<f64>> {
    let (s, n) = (cfg.s, cfg.clock_dim);
    if k_prev.len() != s * n {
        return Err(Error::dims("qunn K^{k-1}", s * n, k_prev.len()));
    }
    let d = clock_reorder(l, k, s, n, cfg.p1.at(l))?;
    let mut pre = d.try_matmul(w_lk)?.matvec(k_prev)?;
    cfg.sigma_hidden.apply_in_place(&mut pre);
    let skip = cfg.skip_map(k).apply(k_prev, s, n)?;
    Ok(skip.iter().zip(&pre).map(|(a, b)| a + b).collect())
}

/// Intermediate values of one pipeline step, for audits.
#[derive(Clone, Debug, PartialEq)]
pub struct QunnTrace {
    pub l: usize,
    /// `K^1..K^{L+1}`: the embedding followed by the `L` hidden layers.
    pub hidden: Vec<Vec<f64>>,
    /// `W_l^1..W_l^L`.
    pub weights: Vec<Matrix>,
    pub output: Vec<f64>,
}

/// Stateful QUNN: tracks the clock position and the inputs of the current block.
#[derive(Clone, Debug)]
pub struct Qunn {
    cfg: QunnConfig,
    l: usize,
    block: Vec<Vec<f64>>,
}

impl Qunn {
    pub fn new(cfg: QunnConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Qunn {
            cfg,
            l: 1,
            block: Vec::new(),
        })
    }

    pub fn config(&self) -> &QunnConfig {
        &self.cfg
    }

    /// Clock position of the next input.
    pub fn position(&self) -> usize {
        self.l
    }

    pub fn reset(&mut self) {
        self.l = 1;
        self.block.clear();
    }

    /// Embeds `y` as `Y_l`, runs the hidden layers, projects onto clock `l + 1`
    /// and advances the position, restarting the block after clock `N`.
    pub fn feed_traced(&mut self, y: &[f64]) -> Result<QunnTrace> {
        let (s, n, depth) = (self.cfg.s, self.cfg.clock_dim, self.cfg.depth);
        if y.len() != s {
            return Err(Error::dims("qunn input", s, y.len()));
        }
        let l = self.l;
        self.block.push(y.to_vec());
        let mut hidden = vec![qunn_embed(y, l, n, self.cfg.sigma_embed)?];
        let mut weights = Vec::with_capacity(depth);
        let mut w = self.cfg.w_base.clone().unwrap_or_else(|| Matrix::zeros(s * n, s * n));
        for k in 1..=depth {
            w = qunn_weight_update(&w, &self.block, l, k, n, self.cfg.p2.at(l))?;
            let next = qunn_hidden_step(&self.cfg, hidden.last().expect("embedding present"), l, k, &w)?;
            hidden.push(next);
            weights.push(w.clone());
        }
        let output = qunn_project(hidden.last().expect("non-empty"), l + 1, s, n, self.cfg.sigma_out)?;
        if l >= n {
            self.reset();
        } else {
            self.l += 1;
        }
        Ok(QunnTrace {
            l,
            hidden,
            weights,
            output,
        })
    }

    pub fn feed(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.feed_traced(y)?.output)
    }
}

/// Runs a fresh QUNN over `inputs`; output `i` is the prediction after input `i`.
pub fn qunn_forward(cfg: &QunnConfig, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut q = Qunn::new(cfg.clone())?;
    inputs.iter().map(|y| q.feed(y)).collect()
}

/// Trainable scalars: the `p₁`/`p₂` schedules, the skip maps and a trainable
/// antisymmetric base (its strict upper triangle). The data-driven weights are
/// not counted.
pub fn qunn_param_count(cfg: &QunnConfig) -> usize {
    let skips = if cfg.skip.is_empty() {
        cfg.depth
    } else {
        cfg.skip.iter().map(SkipMap::param_count).sum()
    };
    let base = cfg.w_base.as_ref().map_or(0, |w| w.rows() * w.rows().saturating_sub(1) / 2);
    cfg.p1.param_count() + cfg.p2.param_count() + skips + base
}

/// Entries of the stacked 4n×2n gate matrices of an `layers`-layer LSTM.
pub fn lstm_param_count(n: usize, layers: usize) -> usize {
    8 * n * n * layers
}

/// Least-squares coefficients `[a₀, a₁, a₂]` of `y ≈ a₀ + a₁·x + a₂·x²`.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidConfig("quadratic fit needs at least 3 matching points".into()));
    }
    // Center and scale x so the normal equations stay well conditioned.
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let spread = xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max).max(1.0);
    let u: Vec<f64> = xs.iter().map(|x| (x - mean) / spread).collect();
    let mut ata = Matrix::zeros(3, 3);
    let mut atb = Matrix::zeros(3, 1);
    for (ui, yi) in u.iter().zip(ys) {
        let row = [1.0, *ui, ui * ui];
        for a in 0..3 {
            atb.set(a, 0, atb.get(a, 0) + row[a] * yi);
            for b in 0..3 {
                ata.set(a, b, ata.get(a, b) + row[a] * row[b]);
            }
        }
    }
    let c = ata.solve(&atb)?;
    let (c0, c1, c2) = (c.get(0, 0), c.get(1, 0), c.get(2, 0));
    // Undo the substitution u = (x − m)/d.
    let d2 = spread * spread;
    Ok([
        c0 - c1 * mean / spread + c2 * mean * mean / d2,
        c1 / spread - 2.0 * c2 * mean / d2,
        c2 / d2,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_vec, random_skew, rng_from_seed};
    use crate::numerics::vector;
    use proptest::prelude::*;

    #[test]
    fn clock_states_are_orthonormal() {
        assert_eq!(clock_state(1, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(clock_state(2, 4).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let (c2, c3) = (clock_state(2, 4).unwrap(), clock_state(3, 4).unwrap());
        assert_eq!(vector::dot(&c2, &c3), 0.0);
        assert_eq!(vector::dot(&c2, &c2), 1.0);
        assert!(matches!(clock_state(0, 4), Err(Error::OutOfRange { .. })));
        assert!(matches!(clock_state(5, 4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn embed_examples() {
        assert_eq!(
            qunn_embed(&[1.0, 2.0], 1, 2, Activation::Identity).unwrap(),
            vec![1.0, 2.0, 0.0, 0.0]
        );
        assert_eq!(
            qunn_embed(&[1.0, 2.0], 2, 2, Activation::Identity).unwrap(),
            vec![0.0, 0.0, 1.0, 2.0]
        );
        let t = qunn_embed(&[1.0, 2.0], 2, 2, Activation::Tanh).unwrap();
        assert_eq!(t, vec![0.0, 0.0, 1.0f64.tanh(), 2.0f64.tanh()]);
        // Matches the Kronecker product with the clock factor first.
        let c = Matrix::column(&clock_state(2, 3).unwrap());
        let y = Matrix::column(&[4.0, 5.0]);
        assert_eq!(
            kron(&c, &y).data(),
            qunn_embed(&[4.0, 5.0], 2, 3, Activation::Identity).unwrap().as_slice()
        );
    }

    #[test]
    fn project_examples() {
        assert_eq!(
            qunn_project(&[1.0, 2.0, 3.0, 4.0], 2, 2, 2, Activation::Identity).unwrap(),
            vec![3.0, 4.0]
        );
        assert_eq!(
            qunn_project(&[1.0, 2.0, 3.0, 4.0], 3, 2, 2, Activation::Identity).unwrap(),
            vec![1.0, 2.0]
        );
        let y = [0.3, -0.7, 1.1];
        let k = qunn_embed(&y, 2, 4, Activation::Tanh).unwrap();
        let back = qunn_project(&k, 2, 3, 4, Activation::Identity).unwrap();
        assert_eq!(back, Activation::Tanh.apply(&y));
        assert_eq!(qunn_project(&k, 3, 3, 4, Activation::Identity).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            qunn_project(&k, 1, 3, 3, Activation::Identity),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn weight_update_examples() {
        let mut rng = rng_from_seed(61);
        let (s, n) = (2, 3);
        let block: Vec<Vec<f64>> = (0..3).map(|_| gaussian_vec(&mut rng, s)).collect();
        let w0 = random_skew(&mut rng, s * n);
        assert_eq!(qunn_weight_update(&w0, &block, 3, 1, n, 0.0).unwrap(), w0);
        let w = qunn_weight_update(&Matrix::zeros(6, 6), &block, 3, 1, n, 1.0).unwrap();
        assert!(!w.is_zero());
        assert_eq!(w.skew_residual(), 0.0);
        // Oracle: the bracket assembled from explicit Kronecker products.
        let c = |j| Matrix::column(&clock_state(j, n).unwrap());
        let y = |j: usize| Matrix::column(&block[j - 1]);
        let first = kron(&(&c(2) * &c(3).transpose()), &(&y(2) * &y(3).transpose()));
        let second = kron(&(&c(3) * &c(2).transpose()), &(&y(3) * &y(2).transpose()));
        assert!(w.max_abs_diff(&(&first - &second)) <= 1e-15);
        // Equal data at distinct clocks still gives a nonzero antisymmetric bracket.
        let same = vec![block[0].clone(), block[0].clone()];
        let w = qunn_weight_update(&Matrix::zeros(6, 6), &same, 2, 1, n, 1.0).unwrap();
        assert!(!w.is_zero() && w.skew_residual() == 0.0);
        // Before the block start the bracket vanishes.
        assert!(qunn_weight_update(&Matrix::zeros(6, 6), &block, 1, 1, n, 1.0).unwrap().is_zero());
    }

    #[test]
    fn reorder_operator() {
        assert!(clock_reorder(2, 1, 2, 3, 0.0).unwrap().is_identity());
        let d = clock_reorder(3, 2, 2, 3, 0.4).unwrap();
        assert_eq!(d.shape(), (6, 6));
        let off = &d - &Matrix::scaled_identity(6, 0.6);
        assert!(off.skew_residual() == 0.0 && !off.is_zero());
    }

    #[test]
    fn all_off_is_closed_form() {
        let mut rng = rng_from_seed(62);
        for (n, depth, s) in [(1, 2, 3), (2, 1, 2), (4, 3, 3)] {
            let mut cfg = QunnConfig::all_off(n, depth, s);
            cfg.sigma_embed = Activation::Tanh;
            cfg.sigma_out = Activation::Sigmoid;
            let inputs: Vec<Vec<f64>> = (0..9).map(|_| gaussian_vec(&mut rng, s)).collect();
            let out = qunn_forward(&cfg, &inputs).unwrap();
            for (i, (y, o)) in inputs.iter().zip(&out).enumerate() {
                let l = i % n + 1;
                let expected: Vec<f64> = if wrap_clock(l + 1, n) == l {
                    Activation::Sigmoid.apply(&Activation::Tanh.apply(y))
                } else {
                    vec![Activation::Sigmoid.eval(0.0); s]
                };
                assert_eq!(o, &expected);
            }
        }
    }

    #[test]
    fn clock_shift_skip_carries_the_input_forward() {
        let mut cfg = QunnConfig::all_off(3, 1, 2);
        cfg.skip = vec![SkipMap::ClockShift { value: 1.0 }];
        let out = qunn_forward(&cfg, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(out, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = SkipMap::ClockShift { value: 1.0 }.matrix(2, 3);
        let k = qunn_embed(&[1.0, 2.0], 3, 3, Activation::Identity).unwrap();
        assert_eq!(m.matvec(&k).unwrap(), vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_audit() {
        let mut rng = rng_from_seed(63);
        let cfg = QunnConfig {
            p1: PSchedule::Constant(0.3),
            p2: PSchedule::PerPosition(vec![0.2, 0.5, 0.9, 1.0]),
            w_base: Some(random_skew(&mut rng, 12)),
            ..QunnConfig::all_off(4, 3, 3)
        };
        let mut q = Qunn::new(cfg).unwrap();
        for _ in 0..9 {
            let tr = q.feed_traced(&gaussian_vec(&mut rng, 3)).unwrap();
            assert!(tr.hidden.iter().all(|h| h.len() == 12));
            assert!(tr.weights.iter().all(|w| w.shape() == (12, 12)));
            assert_eq!(tr.output.len(), 3);
        }
        let d = clock_reorder(2, 1, 2, 3, 0.5).unwrap();
        assert_eq!(d.shape(), (6, 6));
    }

    #[test]
    fn block_position_wraps() {
        let mut q = Qunn::new(QunnConfig::all_off(3, 1, 1)).unwrap();
        let mut seen = Vec::new();
        for _ in 0..7 {
            seen.push(q.position());
            q.feed(&[1.0]).unwrap();
        }
        assert_eq!(seen, vec![1, 2, 3, 1, 2, 3, 1]);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(qunn_param_count(&QunnConfig::all_off(4, 5, 2)), 2 + 5);
        assert_eq!(lstm_param_count(3, 1), 72);
        let ns = [2.0, 4.0, 8.0, 16.0];
        let q: Vec<f64> = ns
            .iter()
            .map(|&n| qunn_param_count(&QunnConfig::all_off(n as usize, n as usize, 1)) as f64)
            .collect();
        let fit = quadratic_fit(&ns, &q).unwrap();
        assert!(fit[2].abs() <= 1e-9 && (fit[1] - 1.0).abs() <= 1e-9 && (fit[0] - 2.0).abs() <= 1e-9);
        let l: Vec<f64> = ns.iter().map(|&n| lstm_param_count(n as usize, 1) as f64).collect();
        let fit = quadratic_fit(&ns, &l).unwrap();
        assert!((fit[2] - 8.0).abs() <= 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = QunnConfig::all_off(2, 1, 1);
        cfg.p1 = PSchedule::Constant(1.5);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.p1 = PSchedule::PerPosition(vec![0.1]);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.p1 = PSchedule::Constant(0.5);
        cfg.w_base = Some(Matrix::identity(2));
        assert!(matches!(cfg.validate(), Err(Error::NotSkew(_))));
        let json = r#"{"clock_dim":2,"depth":1,"s":1,"p1":0.5,"p2":[0.1,0.2]}"#;
        let parsed: QunnConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.p2, PSchedule::PerPosition(vec![0.1, 0.2]));
        assert_eq!(parsed.sigma_hidden, Activation::Tanh);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dynamical_weights_stay_antisymmetric(seed in any::<u64>(), n in 1usize..6, s in 1usize..4, depth in 1usize..5, p2 in 0.0f64..=1.0, steps in 1usize..12) {
            let mut rng = rng_from_seed(seed);
            let cfg = QunnConfig {
                p1: PSchedule::Constant(0.5),
                p2: PSchedule::Constant(p2),
                w_base: Some(random_skew(&mut rng, s * n)),
                ..QunnConfig::all_off(n, depth, s)
            };
            let mut q = Qunn::new(cfg).unwrap();
            for _ in 0..steps {
                let tr = q.feed_traced(&gaussian_vec(&mut rng, s)).unwrap();
                for w in &tr.weights {
                    prop_assert!(w.skew_residual() <= 1e-12);
                }
            }
        }

        #[test]
        fn reorder_is_identity_plus_antisymmetric(l in 1usize..6, k in 1usize..6, p1 in 0.0f64..=1.0) {
            let n = 5;
            prop_assume!(l <= n);
            let d = clock_reorder(l, k, 2, n, p1).unwrap();
            let off = &d - &Matrix::scaled_identity(2 * n, 1.0 - p1);
            prop_assert!(off.skew_residual() == 0.0);
        }
    }
}

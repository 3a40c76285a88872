//! Algebraic (BN) stability certificate and twin-trajectory perturbation probes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::random::{gaussian_matrix, gaussian_vec, random_skew, rng_from_seed};
use crate::numerics::{eig_symmetric, monotonicity_probe, vector, Activation, Matrix};
use crate::odernn::{OdeRnn, OdeRnnConfig, Tableau};

/// Block matrix `Q_ij = β_i·α_ij + β_j·α_ji − β_i·β_jᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurrageButcherTensor {
    pub n: usize,
    pub p: usize,
    pub blocks: Vec<Vec<Matrix>>,
    pub assembled: Matrix,
}

impl BurrageButcherTensor {
    /// `max |Q − Qᵀ|` of the assembled matrix.
    pub fn asymmetry(&self) -> f64 {
        self.assembled.asymmetry()
    }
}

pub fn burrage_butcher(alpha: &[Vec<Matrix>], beta: &[Matrix]) -> Result<BurrageButcherTensor> {
    let n = beta.len();
    if alpha.len() != n || alpha.iter().any(|r| r.len() != n) {
        return Err(Error::dims("alpha grid", format!("{n}x{n}"), alpha.len()));
    }
    let p = beta.first().map_or(0, Matrix::rows);
    for m in beta {
        if m.shape() != (p, p) {
            return Err(Error::dims(
                "beta_k (square, s = p)",
                format!("{p}x{p}"),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
    }
    for m in alpha.iter().flatten() {
        if m.shape() != (p, p) {
            return Err(Error::dims("alpha_qk", format!("{p}x{p}"), format!("{}x{}", m.rows(), m.cols())));
        }
    }
    let mut blocks = Vec::with_capacity(n);
    let mut assembled = Matrix::zeros(n * p, n * p);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let q = &(&(&beta[i] * &alpha[i][j]) + &(&beta[j] * &alpha[j][i])) - &(&beta[i] * &beta[j].transpose());
            assembled.set_block(i * p, j * p, &q);
            row.push(q);
        }
        blocks.push(row);
    }
    Ok(BurrageButcherTensor { n, p, blocks, assembled })
}

/// Outcome of the certificate, optionally with empirical probe results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub certified: bool,
    pub q_psd: bool,
    pub betas_psd: Vec<bool>,
    pub min_eig_q: f64,
    pub min_eig_betas: Vec<f64>,
    /// `max |Q − Qᵀ|`; the PSD test is applied to the symmetric part, which
    /// carries the whole quadratic form.
    pub q_asymmetry: f64,
    pub empirical_max_growth: Option<f64>,
    pub probes_run: usize,
}

fn min_eig_of_form(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 {
        return Ok(0.0);
    }
    Ok(eig_symmetric(&m.symmetric_part())?.values[0])
}

fn passes(min_eig: f64, m: &Matrix, tol: f64) -> bool {
    min_eig >= -tol * m.max_abs().max(1.0)
}

/// Certified iff the assembled `Q` and every `β_k` are positive semi-definite.
pub fn certify_bn_stability(cfg: &OdeRnnConfig, tol: f64) -> Result<StabilityReport> {
    cfg.validate()?;
    let q = burrage_butcher(&cfg.alpha, &cfg.beta)?;
    let min_eig_q = min_eig_of_form(&q.assembled)?;
    let q_psd = passes(min_eig_q, &q.assembled, tol);
    let mut min_eig_betas = Vec::with_capacity(cfg.n);
    let mut betas_psd = Vec::with_capacity(cfg.n);
    for b in &cfg.beta {
        let m = min_eig_of_form(b)?;
        min_eig_betas.push(m);
        betas_psd.push(passes(m, b, tol));
    }
    Ok(StabilityReport {
        certified: q_psd && betas_psd.iter().all(|&x| x),
        q_psd,
        betas_psd,
        min_eig_q,
        min_eig_betas,
        q_asymmetry: q.asymmetry(),
        empirical_max_growth: None,
        probes_run: 0,
    })
}

/// Per-step distances of a twin pair of autonomous trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    /// `‖Y_k − Y'_k‖` for `k = 0..=steps`.
    pub distances: Vec<f64>,
    /// `max_k ‖Y_k − Y'_k‖ / ‖δ_0‖` (0 when `δ_0 = 0`).
    pub max_ratio: f64,
    /// Largest single-step increase `‖δ_k‖ − ‖δ_{k−1}‖`, relative to `‖δ_0‖`.
    pub max_step_increase: f64,
}

fn trace_from_distances(distances: Vec<f64>) -> GrowthTrace {
    let d0 = distances[0];
    if d0 == 0.0 {
        return GrowthTrace {
            max_ratio: 0.0,
            max_step_increase: 0.0,
            distances,
        };
    }
    let max_ratio = distances.iter().fold(0.0f64, |m, d| m.max(d / d0));
    let max_step_increase = distances.windows(2).fold(f64::NEG_INFINITY, |m, w| m.max((w[1] - w[0]) / d0));
    GrowthTrace {
        max_ratio,
        max_step_increase: max_step_increase.max(0.0),
        distances,
    }
}

/// Twin trajectories from `y0` and `y0 + δ0` under autonomous feedback.
pub fn perturbation_probe(cfg: &OdeRnnConfig, y0: &[f64], delta0: &[f64], steps: usize) -> Result<GrowthTrace> {
    if delta0.len() != y0.len() {
        return Err(Error::dims("perturbation", y0.len(), delta0.len()));
    }
    let base = OdeRnn::new(cfg.clone())?.rollout(y0, steps)?;
    twin_against(cfg, &base, delta0)
}

fn twin_against(cfg: &OdeRnnConfig, base: &[Vec<f64>], delta0: &[f64]) -> Result<GrowthTrace> {
    let mut twin = OdeRnn::new(cfg.clone())?;
    let mut y: Vec<f64> = vector::add(&base[0], delta0);
    let mut distances = Vec::with_capacity(base.len());
    distances.push(vector::dist(&y, &base[0]));
    for b in &base[1..] {
        let next = twin.feed(&y)?;
        y.copy_from_slice(next);
        distances.push(vector::dist(&y, b));
    }
    Ok(trace_from_distances(distances))
}

/// Summary of many probes sharing one base trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub probes_run: usize,
    pub steps: usize,
    pub max_ratio: f64,
    pub max_step_increase: f64,
    /// Per-step maximum of `‖δ_k‖/‖δ_0‖` over all probes.
    pub envelope: Vec<f64>,
}

/// Runs `seeds` probes with random perturbations of norm `delta_norm`.
/// Probes are independent and run in parallel; the reduction is order-free.
pub fn probe_many(cfg: &OdeRnnConfig, y0: &[f64], steps: usize, seeds: &[u64], delta_norm: f64) -> Result<ProbeSummary> {
    for a in &cfg.activations {
        if !monotonicity_probe(*a, 256, 0) {
            return Err(Error::InvalidConfig(format!("activation {a:?} failed the monotonicity probe")));
        }
    }
    let base = OdeRnn::new(cfg.clone())?.rollout(y0, steps)?;
    let traces: Vec<GrowthTrace> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = rng_from_seed(seed);
            let mut d = gaussian_vec(&mut rng, y0.len());
            let nd = vector::norm(&d);
            if nd > 0.0 {
                d = vector::scale(&d, delta_norm / nd);
            }
            twin_against(cfg, &base, &d)
        })
        .collect::<Result<_>>()?;
    let mut envelope = vec![0.0f64; steps + 1];
    let mut max_ratio = 0.0f64;
    let mut max_step_increase = 0.0f64;
    for t in &traces {
        let d0 = t.distances[0];
        if d0 > 0.0 {
            for (e, d) in envelope.iter_mut().zip(&t.distances) {
                *e = e.max(d / d0);
            }
        }
        max_ratio = max_ratio.max(t.max_ratio);
        max_step_increase = max_step_increase.max(t.max_step_increase);
    }
    Ok(ProbeSummary {
        probes_run: traces.len(),
        steps,
        max_ratio,
        max_step_increase,
        envelope,
    })
}

/// Certificate plus `seeds.len()` probes folded into one report.
pub fn certify_and_probe(
    cfg: &OdeRnnConfig,
    tol: f64,
    y0: &[f64],
    steps: usize,
    seeds: &[u64],
    delta_norm: f64,
) -> Result<(StabilityReport, ProbeSummary)> {
    let mut report = certify_bn_stability(cfg, tol)?;
    let summary = probe_many(cfg, y0, steps, seeds, delta_norm)?;
    report.empirical_max_growth = Some(summary.max_ratio);
    report.probes_run = summary.probes_run;
    Ok((report, summary))
}

/// Sampled check of `⟨f(x) − f(y), x − y⟩ ≤ 0` (within `1e-12·max(1, ‖x − y‖²)`).
pub fn monotone_field_check(f: impl Fn(&[f64]) -> Vec<f64>, dim: usize, samples: usize, seed: u64) -> bool {
    let mut rng = rng_from_seed(seed);
    for _ in 0..samples.max(1) {
        let x = gaussian_vec(&mut rng, dim);
        let y = gaussian_vec(&mut rng, dim);
        let diff = vector::sub(&x, &y);
        let inner = vector::dot(&vector::sub(&f(&x), &f(&y)), &diff);
        if inner > 1e-12 * vector::dot(&diff, &diff).max(1.0) {
            return false;
        }
    }
    true
}

/// Random algebraically stable tableau: positive weights `e`, and
/// `A = B⁻¹(eeᵀ/2 + M/2 + S)` with `B = diag(e)`, `M` PSD, `S` skew, so that
/// `BA + AᵀB − eeᵀ = M`.
pub fn random_algebraically_stable_tableau(rng: &mut impl Rng, n: usize) -> Tableau {
    let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let g = gaussian_matrix(rng, n, n);
    let m = (&g * &g.transpose()).scale(0.2 / n as f64);
    let s = random_skew(rng, n).scale(0.5);
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0.5 * e[i] * e[j] + 0.5 * m.get(i, j) + s.get(i, j)) / e[i];
        }
    }
    let c = a.iter().map(|r| r.iter().sum()).collect();
    Tableau { a, b: e, c }
}

/// Monotone field matrix for `y ↦ F·σ(y + b)`: `skew − c·I` when σ is the
/// identity, a negative diagonal otherwise.
pub fn random_monotone_field(rng: &mut impl Rng, p: usize, sigma: Activation) -> Matrix {
    if sigma == Activation::Identity {
        let c = rng.random_range(0.1..1.0);
        &random_skew(rng, p) - &Matrix::scaled_identity(p, c)
    } else {
        let d: Vec<f64> = (0..p).map(|_| -rng.random_range(0.1..1.0)).collect();
        Matrix::diag(&d)
    }
}

fn inf_norm(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// A certified ODERNN integrating a monotone field with an algebraically stable
/// tableau. The step is chosen so that `h·‖A‖_∞·‖F‖_∞ ≤ 0.25`.
pub fn random_certified_config(rng: &mut impl Rng, n: usize, p: usize, sigma: Activation) -> Result<OdeRnnConfig> {
    let tab = random_algebraically_stable_tableau(rng, n);
    let field = random_monotone_field(rng, p, sigma);
    let bias = gaussian_vec(rng, p);
    let a_norm = tab.a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let h = 0.25 / (a_norm * inf_norm(&field)).max(1e-12);
    let h = h.min(1.0);
    OdeRnnConfig::runge_kutta(&tab, &field, &bias, sigma, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DEFAULT_PSD_TOL;
    use proptest::prelude::*;

    fn scalar_cfg(tab: Tableau, lam: f64, h: f64) -> OdeRnnConfig {
        OdeRnnConfig::runge_kutta(&tab, &Matrix::scaled_identity(1, lam), &[0.0], Activation::Identity, h).unwrap()
    }

    #[test]
    fn tensor_examples() {
        let euler = burrage_butcher(&[vec![Matrix::zeros(1, 1)]], &[Matrix::identity(1)]).unwrap();
        assert_eq!(euler.assembled.get(0, 0), -1.0);
        let mid = burrage_butcher(&[vec![Matrix::scaled_identity(1, 0.5)]], &[Matrix::identity(1)]).unwrap();
        assert_eq!(mid.assembled.get(0, 0), 0.0);
        let mut rng = rng_from_seed(1);
        let alpha: Vec<Vec<Matrix>> = (0..3).map(|_| (0..3).map(|_| gaussian_matrix(&mut rng, 2, 2)).collect()).collect();
        let zero = burrage_butcher(&alpha, &vec![Matrix::zeros(2, 2); 3]).unwrap();
        assert!(zero.assembled.is_zero());
    }

    #[test]
    fn certificate_examples() {
        let mid = certify_bn_stability(&scalar_cfg(Tableau::implicit_midpoint(), -1.0, 0.1), DEFAULT_PSD_TOL).unwrap();
        assert!(mid.certified && mid.q_psd);
        assert_eq!(mid.min_eig_q, 0.0);
        let eul = certify_bn_stability(&scalar_cfg(Tableau::explicit_euler(), -1.0, 0.1), DEFAULT_PSD_TOL).unwrap();
        assert!(!eul.certified);
        assert_eq!(eul.min_eig_q, -1.0);
        let mut neg = scalar_cfg(Tableau::implicit_midpoint(), -1.0, 0.1);
        neg.beta[0] = Matrix::scaled_identity(1, -1.0);
        let r = certify_bn_stability(&neg, DEFAULT_PSD_TOL).unwrap();
        assert!(!r.certified && r.betas_psd == vec![false]);
    }

    #[test]
    fn probe_examples() {
        let cfg = scalar_cfg(Tableau::explicit_euler(), -30.0, 0.1);
        let zero = perturbation_probe(&cfg, &[1.0], &[0.0], 20).unwrap();
        assert!(zero.distances.iter().all(|&d| d == 0.0));

        // |1 + hλ| = 2: amplification.
        let grow = perturbation_probe(&cfg, &[1.0], &[1e-3], 20).unwrap();
        assert!(grow.max_ratio > 10.0);

        let mut rng = rng_from_seed(4);
        let field = &random_skew(&mut rng, 3) - &Matrix::scaled_identity(3, 0.3);
        let mid = OdeRnnConfig::runge_kutta(&Tableau::implicit_midpoint(), &field, &[0.0; 3], Activation::Identity, 0.2).unwrap();
        let t = perturbation_probe(&mid, &[1.0, 0.0, -1.0], &[1e-2, 1e-2, 0.0], 1000).unwrap();
        assert!(t.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn monotone_examples() {
        assert!(monotone_field_check(|y| y.iter().map(|v| -v).collect(), 3, 500, 1));
        assert!(!monotone_field_check(|y| y.to_vec(), 3, 500, 2));
        let mut rng = rng_from_seed(3);
        let a = random_skew(&mut rng, 4);
        assert!(monotone_field_check(|y| a.matvec(y).unwrap(), 4, 500, 3));
        assert!(monotone_field_check(|y| (-&a).matvec(y).unwrap(), 4, 500, 3));
    }

    #[test]
    fn certificate_is_deterministic() {
        let mut rng = rng_from_seed(8);
        let cfg = random_certified_config(&mut rng, 3, 2, Activation::Tanh).unwrap();
        let a = certify_bn_stability(&cfg, DEFAULT_PSD_TOL).unwrap();
        let b = certify_bn_stability(&cfg, DEFAULT_PSD_TOL).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.certified);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn q_blocks_transpose_symmetry_for_scalar_blocks(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let tab = random_algebraically_stable_tableau(&mut rng, n);
            let alpha: Vec<Vec<Matrix>> = tab.a.iter().map(|r| r.iter().map(|&x| Matrix::scaled_identity(2, x)).collect()).collect();
            let beta: Vec<Matrix> = tab.b.iter().map(|&x| Matrix::scaled_identity(2, x)).collect();
            let q = burrage_butcher(&alpha, &beta).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(q.blocks[i][j].max_abs_diff(&q.blocks[j][i].transpose()) < 1e-12);
                }
            }
            prop_assert!(crate::numerics::is_psd(&q.assembled, DEFAULT_PSD_TOL).unwrap());
        }

        #[test]
        fn generated_configs_are_certified(seed in any::<u64>(), n in 1usize..4, p in 1usize..4, which in 0usize..3) {
            let sigma = [Activation::Identity, Activation::Tanh, Activation::Relu][which];
            let mut rng = rng_from_seed(seed);
            let cfg = random_certified_config(&mut rng, n, p, sigma).unwrap();
            prop_assert!(certify_bn_stability(&cfg, DEFAULT_PSD_TOL).unwrap().certified);
            let field = cfg.kappa[0].clone();
            let b = cfg.b[0].clone();
            let f = |y: &[f64]| {
                let u: Vec<f64> = y.iter().zip(&b).map(|(a, c)| sigma.eval(a + c)).collect();
                field.matvec(&u).unwrap()
            };
            prop_assert!(monotone_field_check(f, p, 200, seed));
        }

        #[test]
        fn monotone_both_ways_only_when_inner_products_vanish(seed in any::<u64>(), c in 0.01f64..2.0) {
            let mut rng = rng_from_seed(seed);
            let a = &random_skew(&mut rng, 3) - &Matrix::scaled_identity(3, c);
            prop_assert!(monotone_field_check(|y| a.matvec(y).unwrap(), 3, 100, seed));
            prop_assert!(!monotone_field_check(|y| (-&a).matvec(y).unwrap(), 3, 100, seed));
        }
    }
}

//! Clock Hamiltonians of step programs and their zero-energy history states.
//!
//! The register is `data ⊗ clock` with clock labels `1..=L_c+1`; vectors and
//! matrices are stored clock-major, so the data block at clock `j` occupies
//! entries `(j−1)·d..j·d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cnorm, eig_hermitian, CMatrix, C64};

/// Largest Hamiltonian dimension accepted.
pub const MAX_DIM: usize = 4096;
/// Unit-norm and unitarity tolerance for program inputs.
pub const INPUT_TOL: f64 = 1e-12;
/// Eigenvalues within this distance of the smallest one count as ground states.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// A read/write pair `U = |w⟩⟨r|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadWrite {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

/// Truth tables over at most 3 input and 3 output bits; `tables[j][x]` is the
/// output of step `j` on input `x`.
///
/// When every table is a permutation of `in_bits = out_bits` bits, step `j` is
/// the permutation matrix `|f_j(x)⟩⟨x|` on the bits themselves. Otherwise the
/// register carries `out_bits` ancilla bits after the input bits (index
/// `x·2^{out_bits} + a`) and step `j` is the reversible embedding
/// `(x, a) ↦ (x, a ⊕ f_j(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BooleanProgram {
    pub in_bits: usize,
    pub out_bits: usize,
    pub tables: Vec<Vec<usize>>,
}

impl BooleanProgram {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.in_bits) || !(1..=3).contains(&self.out_bits) {
            return Err(Error::InvalidConfig("boolean programs use 1 to 3 input and output bits".into()));
        }
        for t in &self.tables {
            if t.len() != 1 << self.in_bits {
                return Err(Error::dims("truth table rows", 1usize << self.in_bits, t.len()));
            }
            if let Some(&v) = t.iter().find(|&&v| v >= 1 << self.out_bits) {
                return Err(Error::OutOfRange {
                    index: v,
                    max: (1 << self.out_bits) - 1,
                });
            }
        }
        Ok(())
    }

    /// Whether every step is a bijection of the input bits, in which case no
    /// ancilla is needed.
    pub fn is_permutation(&self) -> bool {
        self.in_bits == self.out_bits
            && self.tables.iter().all(|t| {
                let mut seen = vec![false; t.len()];
                t.iter().all(|&v| !std::mem::replace(&mut seen[v], true))
            })
    }

    pub fn data_dim(&self) -> usize {
        if self.is_permutation() {
            1 << self.in_bits
        } else {
            1 << (self.in_bits + self.out_bits)
        }
    }

    /// Register basis index holding input `x` before the first step.
    pub fn encode(&self, x: usize) -> usize {
        if self.is_permutation() {
            x
        } else {
            x << self.out_bits
        }
    }

    /// Classical evaluation: the register basis index after all steps.
    pub fn evaluate(&self, x: usize) -> usize {
        if self.is_permutation() {
            self.tables.iter().fold(x, |acc, t| t[acc])
        } else {
            let acc = self.tables.iter().fold(0, |a, t| a ^ t[x]);
            (x << self.out_bits) | acc
        }
    }

    fn unitaries(&self) -> Vec<CMatrix> {
        let d = self.data_dim();
        self.tables
            .iter()
            .map(|t| {
                let mut u = CMatrix::zeros(d, d);
                for col in 0..d {
                    let row = if self.is_permutation() {
                        t[col]
                    } else {
                        let (x, a) = (col >> self.out_bits, col & ((1 << self.out_bits) - 1));
                        (x << self.out_bits) | (a ^ t[x])
                    };
                    u.set(row, col, C64::new(1.0, 0.0));
                }
                u
            })
            .collect()
    }
}

/// A program of `L_c` steps acting on a `data_dim`-dimensional register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClockProgram {
    Unitary { data_dim: usize, steps: Vec<CMatrix> },
    RankOne { data_dim: usize, steps: Vec<ReadWrite> },
    Boolean(BooleanProgram),
}

impl ClockProgram {
    pub fn data_dim(&self) -> usize {
        match self {
            ClockProgram::Unitary { data_dim, .. } | ClockProgram::RankOne { data_dim, .. } => *data_dim,
            ClockProgram::Boolean(b) => b.data_dim(),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            ClockProgram::Unitary { steps, .. } => steps.len(),
            ClockProgram::RankOne { steps, .. } => steps.len(),
            ClockProgram::Boolean(b) => b.tables.len(),
        }
    }

    /// True when every step is unitary (unitary and Boolean modes).
    pub fn is_unitary_mode(&self) -> bool {
        !matches!(self, ClockProgram::RankOne { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.data_dim();
        if d == 0 {
            return Err(Error::InvalidConfig("data_dim must be at least 1".into()));
        }
        match self {
            ClockProgram::Unitary { steps, .. } => {
                for u in steps {
                    if u.rows() != d || u.cols() != d {
                        return Err(Error::dims("program step", d, u.rows()));
                    }
                    let r = u.unitary_residual();
                    if r > INPUT_TOL {
                        return Err(Error::NotUnitary(r));
                    }
                }
            }
            ClockProgram::RankOne { steps, .. } => {
                for rw in steps {
                    for v in [&rw.r, &rw.w] {
                        if v.len() != d {
                            return Err(Error::dims("read/write vector", d, v.len()));
                        }
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if (norm - 1.0).abs() > INPUT_TOL {
                            return Err(Error::NotNormalized(norm));
                        }
                    }
                }
            }
            ClockProgram::Boolean(b) => b.validate()?,
        }
        Ok(())
    }

    /// Step operators `U_1..U_{L_c}`.
    pub fn operators(&self) -> Vec<CMatrix> {
        match self {
            ClockProgram::Unitary { steps, .. } => steps.clone(),
            ClockProgram::RankOne { steps, .. } => steps
                .iter()
                .map(|rw| CMatrix::outer(&real_to_complex(&rw.w), &real_to_complex(&rw.r)))
                .collect(),
            ClockProgram::Boolean(b) => b.unitaries(),
        }
    }

    /// For rank-one programs, whether `w_j = r_{j+1}` for every consecutive pair
    /// (within [`INPUT_TOL`]); always true in the other modes.
    pub fn is_chained(&self) -> bool {
        match self {
            ClockProgram::RankOne { steps, .. } => steps
                .windows(2)
                .all(|p| p[0].w.iter().zip(&p[1].r).all(|(a, b)| (a - b).abs() <= INPUT_TOL)),
            _ => true,
        }
    }
}

pub fn real_to_complex(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockHamiltonian {
    pub steps: usize,
    pub data_dim: usize,
    pub h: CMatrix,
    /// Ascending.
    pub spectrum: Vec<f64>,
    pub ground_energy: f64,
    /// Number of eigenvalues within [`DEGENERACY_TOL`] of the smallest.
    pub ground_multiplicity: usize,
    /// Distance from the ground level to the next distinct level (0 when the
    /// spectrum has a single level).
    pub gap: f64,
}

fn level_summary(values: &[f64]) -> (f64, usize, f64) {
    let e0 = values[0];
    let mult = values.iter().filter(|&&v| v - e0 <= DEGENERACY_TOL).count();
    let gap = values.get(mult).map_or(0.0, |v| v - e0);
    (e0, mult, gap)
}

/// `Σ_j (I⊗|j⟩⟨j| − U_j⊗|j+1⟩⟨j| − U_j†⊗|j⟩⟨j+1| + I⊗|j+1⟩⟨j+1|)`.
pub fn assemble_h_tm(prog: &ClockProgram) -> Result<CMatrix> {
    prog.validate()?;
    let (d, lc) = (prog.data_dim(), prog.steps());
    let dim = d * (lc + 1);
    if dim > MAX_DIM {
        return Err(Error::TooLarge { dim, limit: MAX_DIM });
    }
    let mut h = CMatrix::zeros(dim, dim);
    let one = C64::new(1.0, 0.0);
    for (j, u) in prog.operators().iter().enumerate() {
        // Clock labels j+1 and j+2 occupy blocks j and j+1.
        let (a, b) = (j * d, (j + 1) * d);
        for i in 0..d {
            h.set(a + i, a + i, h.get(a + i, a + i) + one);
            h.set(b + i, b + i, h.get(b + i, b + i) + one);
            for k in 0..d {
                let v = u.get(i, k);
                h.set(b + i, a + k, h.get(b + i, a + k) - v);
                h.set(a + k, b + i, h.get(a + k, b + i) - v.conj());
            }
        }
    }
    Ok(h)
}

pub fn build_h_tm(prog: &ClockProgram) -> Result<ClockHamiltonian> {
    let h = assemble_h_tm(prog)?;
    let spectrum = eig_hermitian(&h)?.values;
    let (ground_energy, ground_multiplicity, gap) = level_summary(&spectrum);
    Ok(ClockHamiltonian {
        steps: prog.steps(),
        data_dim: prog.data_dim(),
        h,
        spectrum,
        ground_energy,
        ground_multiplicity,
        gap,
    })
}

/// `ψ_0 = initial`, `ψ_j = U_j·ψ_{j−1}`.
pub fn trajectory(prog: &ClockProgram, initial: &[C64]) -> Result<Vec<Vec<C64>>> {
    prog.validate()?;
    if initial.len() != prog.data_dim() {
        return Err(Error::dims("initial state", prog.data_dim(), initial.len()));
    }
    let norm = cnorm(initial);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    let mut out = vec![initial.to_vec()];
    for u in prog.operators() {
        let next = u.matvec(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// `Σ_{j=0}^{L_c} ψ_j ⊗ |j+1⟩ / √(L_c+1)`.
pub fn history_state(prog: &ClockProgram, initial: &[C64]) -> Result<Vec<C64>> {
    let traj = trajectory(prog, initial)?;
    let norm = (traj.len() as f64).sqrt();
    Ok(traj.iter().flatten().map(|z| z / norm).collect())
}

/// Data block at clock `L_c + 1`, renormalized.
pub fn readout(history: &[C64], steps: usize, data_dim: usize) -> Result<Vec<C64>> {
    let expected = data_dim * (steps + 1);
    if history.len() != expected {
        return Err(Error::dims("history state", expected, history.len()));
    }
    let block = &history[steps * data_dim..];
    let norm = cnorm(block);
    if norm <= 1e-12 {
        return Err(Error::ZeroProjection);
    }
    Ok(block.iter().map(|z| z / norm).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSpaceReport {
    pub ground_energy: f64,
    pub ground_energy_nonnegative: bool,
    pub global_ground_multiplicity: usize,
    /// `‖H·ψ‖` for the normalized history state.
    pub history_residual: f64,
    /// Dimension of the span of the non-zero trajectory blocks.
    pub sector_dim: usize,
    pub sector_ground_energy: f64,
    pub sector_ground_multiplicity: usize,
    pub unique_in_sector: bool,
    /// Gap inside the sector reachable from the initial state.
    pub gap: f64,
    pub chained: bool,
    pub readout: Vec<C64>,
}

/// Checks the zero-energy claim for `prog` started from `initial`. The sector is
/// spanned by `ψ_j ⊗ |j+1⟩` for the trajectory blocks with non-zero norm.
pub fn verify_ground_space(ch: &ClockHamiltonian, prog: &ClockProgram, initial: &[C64]) -> Result<GroundSpaceReport> {
    let traj = trajectory(prog, initial)?;
    let hist = history_state(prog, initial)?;
    let history_residual = cnorm(&ch.h.matvec(&hist)?);
    let d = prog.data_dim();
    let dim = ch.h.rows();

    let basis: Vec<Vec<C64>> = traj
        .iter()
        .enumerate()
        .filter_map(|(j, psi)| {
            let n = cnorm(psi);
            (n > 1e-12).then(|| {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                for (i, z) in psi.iter().enumerate() {
                    v[j * d + i] = z / n;
                }
                v
            })
        })
        .collect();
    let m = basis.len();
    let hv: Vec<Vec<C64>> = basis.iter().map(|v| ch.h.matvec(v)).collect::<Result<_>>()?;
    let projected = CMatrix::from_fn(m, m, |a, b| basis[a].iter().zip(&hv[b]).map(|(x, y)| x.conj() * y).sum());
    // Symmetrize away rounding before the Hermitian solver sees it.
    let projected = CMatrix::from_fn(m, m, |a, b| (projected.get(a, b) + projected.get(b, a).conj()) * 0.5);
    let sector = eig_hermitian(&projected)?.values;
    let (sector_ground_energy, sector_ground_multiplicity, gap) = level_summary(&sector);

    Ok(GroundSpaceReport {
        ground_energy: ch.ground_energy,
        ground_energy_nonnegative: ch.ground_energy >= -1e-10,
        global_ground_multiplicity: ch.ground_multiplicity,
        history_residual,
        sector_dim: m,
        sector_ground_energy,
        sector_ground_multiplicity,
        unique_in_sector: sector_ground_multiplicity == 1,
        gap,
        chained: prog.is_chained(),
        readout: readout(&hist, prog.steps(), d)?,
    })
}

/// Index of the basis vector `v` is (up to phase) within `tol`, if any.
pub fn decode_basis(v: &[C64], tol: f64) -> Option<usize> {
    let (idx, top) = v.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    let rest: f64 = v.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, z)| z.norm_sqr()).sum();
    ((top.norm() - 1.0).abs() <= tol && rest.sqrt() <= tol).then_some(idx)
}

/// `e_i` in `C^d`.
pub fn basis_state(i: usize, d: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[i] = C64::new(1.0, 0.0);
    v
}

/// Deterministic random unitary program, for tests and demos.
pub fn random_unitary_program(rng: &mut impl rand::Rng, steps: usize, data_dim: usize) -> ClockProgram {
    ClockProgram::Unitary {
        data_dim,
        steps: (0..steps).map(|_| crate::numerics::random::random_unitary(rng, data_dim)).collect(),
    }
}

//! Cyclic Jacobi eigensolvers for small dense symmetric and Hermitian matrices.

use super::cmatrix::{CMatrix, C64};
use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn symmetry_tolerance(max_abs: f64) -> f64 {
    1e-12 * max_abs
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dims("eigensolver (square)", m.rows(), m.cols()));
    }
    let tolerance = symmetry_tolerance(m.max_abs());
    let asymmetry = m.asymmetry();
    if asymmetry > tolerance {
        return Err(Error::NotHermitian { asymmetry, tolerance });
    }
    Ok(())
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Real symmetric eigendecomposition.
pub fn eig_symmetric(m: &Matrix) -> Result<SymEig> {
    check_symmetric(m)?;
    let n = m.rows();
    // Work on the exactly symmetric part so rounding in the input cannot bias rotations.
    let mut a = m.symmetric_part();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius();
    let mut converged = n <= 1 || scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a.get(p, q) * a.get(p, q);
                }
            }
        }
        converged = off.sqrt() <= 1e-15 * scale;
    }
    let diag = a.diagonal();
    let order = sorted_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(SymEig { values, vectors })
}

/// Complex Hermitian eigendecomposition.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies the
/// real Jacobi rotation to the resulting real 2×2 block.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermEig> {
    if !m.is_square() {
        return Err(Error::dims("eigensolver (square)", m.rows(), m.cols()));
    }
    let tolerance = symmetry_tolerance(m.max_abs());
    let asymmetry = m.hermitian_residual();
    if asymmetry > tolerance {
        return Err(Error::NotHermitian { asymmetry, tolerance });
    }
    let n = m.rows();
    let mut a = m.add(&m.adjoint())?.scale(C64::new(0.5, 0.0));
    let mut v = CMatrix::identity(n);
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m.get(i, j).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let mut converged = n <= 1 || scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let g = apq.norm();
                if g <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / g;
                let ph_conj = phase.conj();
                let theta = (a.get(q, q).re - a.get(p, p).re) / (2.0 * g);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J restricted to (p, q): [[c, s], [−s·e^{−iφ}, c·e^{−iφ}]]
                let jqp = -ph_conj * s;
                let jqq = ph_conj * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, akp * c + akq * jqp);
                    a.set(k, q, akp * s + akq * jqq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, apk * c + aqk * jqp.conj());
                    a.set(q, k, apk * s + aqk * jqq.conj());
                }
                a.set(p, q, C64::new(0.0, 0.0));
                a.set(q, p, C64::new(0.0, 0.0));
                let (app, aqq) = (a.get(p, p).re, a.get(q, q).re);
                a.set(p, p, C64::new(app, 0.0));
                a.set(q, q, C64::new(aqq, 0.0));
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, vkp * c + vkq * jqp);
                    v.set(k, q, vkp * s + vkq * jqq);
                }
            }
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a.get(p, q).norm_sqr();
                }
            }
        }
        converged = off.sqrt() <= 1e-15 * scale;
    }
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    let order = sorted_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(HermEig { values, vectors })
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn eigenvalues_symmetric(m: &Matrix) -> Result<Vec<f64>> {
    Ok(eig_symmetric(m)?.values)
}

/// `min λ(m) ≥ −tol·max(1, ‖m‖_max)`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<bool> {
    let min = min_eigenvalue(m)?;
    Ok(min >= -tol * m.max_abs().max(1.0))
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 {
        check_symmetric(m)?;
        return Ok(0.0);
    }
    Ok(eig_symmetric(m)?.values[0])
}

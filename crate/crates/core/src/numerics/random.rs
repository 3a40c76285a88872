//! Seeded random matrices for tests, probes and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cmatrix::{CMatrix, C64};
use super::Matrix;

pub type LabRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Matrix {
    gaussian_matrix(rng, n, n).symmetric_part()
}

pub fn random_skew(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    (&g - &g.transpose()).scale(0.5)
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    g.add(&g.adjoint()).expect("square").scale(C64::new(0.5, 0.0))
}

/// Orthonormal columns by modified Gram–Schmidt on a Gaussian draw.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    loop {
        let g = gaussian_matrix(rng, n, n);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let mut v = g.col(j);
            for u in &cols {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= d * ui;
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv < 1e-8 {
                ok = false;
                break;
            }
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
        if ok {
            return Matrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

/// Unitary with orthonormal columns by modified Gram–Schmidt on a complex Gaussian draw.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    loop {
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let mut v: Vec<C64> = (0..n).map(|i| g.get(i, j)).collect();
            for _ in 0..2 {
                for u in &cols {
                    let d: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= d * ui;
                    }
                }
            }
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if nv < 1e-8 {
                ok = false;
                break;
            }
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
        if ok {
            return CMatrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

/// Cayley transform `(I − A)(I + A)⁻¹`; orthogonal whenever `A` is skew-symmetric.
pub fn cayley(a: &Matrix) -> crate::error::Result<Matrix> {
    let n = a.rows();
    let i = Matrix::identity(n);
    let plus = &i + a;
    let minus = &i - a;
    // (I − A)(I + A)⁻¹ = ((I + A)⁻ᵀ (I − A)ᵀ)ᵀ
    let x = plus.transpose().solve(&minus.transpose())?;
    Ok(x.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_and_unitary_draws() {
        let mut rng = rng_from_seed(5);
        let q = random_orthogonal(&mut rng, 6);
        assert!((&q.transpose() * &q).max_abs_diff(&Matrix::identity(6)) < 1e-13);
        let u = random_unitary(&mut rng, 5);
        assert!(u.unitary_residual() < 1e-13);
    }

    #[test]
    fn cayley_of_skew_is_orthogonal() {
        let mut rng = rng_from_seed(9);
        let a = random_skew(&mut rng, 5);
        let w = cayley(&a).unwrap();
        assert!((&w.transpose() * &w).max_abs_diff(&Matrix::identity(5)) < 1e-12);
        let i = Matrix::identity(5);
        let lhs = &w * &(&i + &a);
        assert!(lhs.max_abs_diff(&(&i - &a)) < 1e-12);
    }

    #[test]
    fn seeding_is_deterministic() {
        let a = gaussian_vec(&mut rng_from_seed(3), 8);
        let b = gaussian_vec(&mut rng_from_seed(3), 8);
        assert_eq!(a, b);
    }
}

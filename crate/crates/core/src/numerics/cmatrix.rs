use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrixRepr", into = "CMatrixRepr")]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CMatrixRepr {
    Complex {
        rows: usize,
        cols: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    },
    Real {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
}

impl TryFrom<CMatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(r: CMatrixRepr) -> Result<Self> {
        match r {
            CMatrixRepr::Complex { rows, cols, re, im } => {
                if re.len() != rows * cols || im.len() != rows * cols {
                    return Err(Error::dims("CMatrix json", rows * cols, re.len().max(im.len())));
                }
                Ok(CMatrix {
                    rows,
                    cols,
                    data: re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect(),
                })
            }
            CMatrixRepr::Real { rows, cols, data } => Ok(CMatrix::from_real(&Matrix::from_vec(rows, cols, data)?)),
        }
    }
}

impl From<CMatrix> for CMatrixRepr {
    fn from(m: CMatrix) -> Self {
        CMatrixRepr::Complex {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_real(m: &Matrix) -> Self {
        Self::from_fn(m.rows(), m.cols(), |i, j| C64::new(m.get(i, j), 0.0))
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |a_ij − conj(a_ji)|`.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                m = m.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        m
    }

    /// `max |(U†U − I)_ij|`.
    pub fn unitary_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let p = self.adjoint().matmul(self).expect("square");
        p.max_abs_diff(&CMatrix::identity(self.rows))
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims("complex matmul", self.cols, other.rows));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.cols {
            return Err(Error::dims("complex matvec", self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::dims("complex add", self.rows * self.cols, other.rows * other.cols));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Real embedding `a + ib ↦ [[a, −b], [b, a]]`, doubling each dimension.
    pub fn embed_as_real(&self) -> Matrix {
        let (r, c) = (self.rows, self.cols);
        let mut m = Matrix::zeros(2 * r, 2 * c);
        for i in 0..r {
            for j in 0..c {
                let z = self.get(i, j);
                m.set(i, j, z.re);
                m.set(i, j + c, -z.im);
                m.set(i + r, j, z.im);
                m.set(i + r, j + c, z.re);
            }
        }
        m
    }

    /// Real parts, if every imaginary part is exactly zero.
    pub fn to_real(&self) -> Option<Matrix> {
        if self.data.iter().any(|z| z.im != 0.0) {
            return None;
        }
        Some(Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).re))
    }
}

/// Complex Kronecker product.
pub fn ckron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a.get(i, j);
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, x * b.get(k, l));
                }
            }
        }
    }
    out
}

/// See [`CMatrix::embed_as_real`].
pub fn embed_complex_as_real(m: &CMatrix) -> Matrix {
    m.embed_as_real()
}

pub fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_embedding_preserves_products() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let b = CMatrix::from_fn(2, 2, |i, j| C64::new(j as f64, 2.0 * i as f64));
        let ab = a.matmul(&b).unwrap().embed_as_real();
        let prod = &a.embed_as_real() * &b.embed_as_real();
        assert!(ab.max_abs_diff(&prod) < 1e-14);
    }

    #[test]
    fn adjoint_of_outer_product() {
        let u = [C64::new(1.0, 1.0), C64::new(0.0, -2.0)];
        let v = [C64::new(0.5, 0.0), C64::new(0.0, 1.0)];
        let uv = CMatrix::outer(&u, &v);
        assert!(uv.adjoint().max_abs_diff(&CMatrix::outer(&v, &u)) < 1e-15);
    }
}

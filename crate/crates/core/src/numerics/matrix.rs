use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// On-disk form. `scaled_identity` is accepted on input only; output is always `real`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MatrixRepr {
    Real { rows: usize, cols: usize, data: Vec<f64> },
    ScaledIdentity { dim: usize, scale: f64 },
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        match r {
            MatrixRepr::Real { rows, cols, data } => Matrix::from_vec(rows, cols, data),
            MatrixRepr::ScaledIdentity { dim, scale } => Ok(Matrix::scaled_identity(dim, scale)),
        }
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        MatrixRepr::Real {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = scale;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dims("Matrix::from_rows", c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Column matrix holding `v`.
    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `D[a]`: square matrix with `a` on the diagonal.
    pub fn diag(a: &[f64]) -> Self {
        let n = a.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in a.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Whether the matrix equals `s·I` for some scalar `s` (exactly).
    pub fn as_scaled_identity(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let s = if self.rows == 0 { 0.0 } else { self.get(0, 0) };
        for i in 0..self.rows {
            for j in 0..self.cols {
                let expect = if i == j { s } else { 0.0 };
                if self.get(i, j) != expect {
                    return None;
                }
            }
        }
        Some(s)
    }

    pub fn is_identity(&self) -> bool {
        self.as_scaled_identity() == Some(1.0) || (self.rows == 0 && self.cols == 0)
    }

    /// `max |a_ij − a_ji|`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// `max |a_ij + a_ji|` (diagonal included).
    pub fn skew_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                m = m.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn symmetric_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn try_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "matmul",
                format!("lhs cols {}", self.cols),
                format!("rhs rows {}", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims("matvec", self.cols, x.len()));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_add_into(x, &mut out);
        Ok(out)
    }

    /// `out += self · x`. Dimensions are the caller's responsibility.
    #[inline]
    pub fn matvec_add_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o += acc;
        }
    }

    /// `out += s · self · x`.
    #[inline]
    pub fn matvec_scaled_add_into(&self, s: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o += s * acc;
        }
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, ctx: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dims(ctx, format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `max |a_ij − b_ij|`; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Copy of the sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Self::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.get(i, j));
            }
        }
    }

    /// Solve `self · X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::dims("solve", "square matrix", format!("{:?}", self.shape())));
        }
        if rhs.rows != self.rows {
            return Err(Error::dims("solve", self.rows, rhs.rows));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = self.max_abs();
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, a.get(i, k).abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= f64::EPSILON * scale * n as f64 || pval == 0.0 {
                return Err(Error::Singular);
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                for j in 0..b.cols {
                    b.data.swap(k * b.cols + j, piv * b.cols + j);
                }
            }
            let d = a.get(k, k);
            for i in k + 1..n {
                let f = a.get(i, k) / d;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
                for j in 0..b.cols {
                    let v = b.get(i, j) - f * b.get(k, j);
                    b.set(i, j, v);
                }
            }
        }
        for j in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b.get(i, j);
                for k in i + 1..n {
                    s -= a.get(i, k) * b.get(k, j);
                }
                b.set(i, j, s / a.get(i, i));
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

// Operator forms panic on shape mismatch; library code that takes user input
// goes through the `try_*` methods.
impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix add: shape mismatch")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix sub: shape mismatch")
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.try_matmul(rhs).expect("matmul: shape mismatch")
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a.get(i, j);
            if x == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out.set(i * br + k, j * bc + l, x * b.get(k, l));
                }
            }
        }
    }
    out
}

/// `diag_embed(a)`: alias of [`Matrix::diag`].
pub fn diag_embed(a: &[f64]) -> Matrix {
    Matrix::diag(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_embed_examples() {
        let d = diag_embed(&[2.0, 3.0]);
        assert_eq!(d, Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap());
        assert_eq!(d.matvec(&[4.0, 5.0]).unwrap(), vec![8.0, 15.0]);
        let b = [0.3, -7.0];
        assert_eq!(diag_embed(&[1.0, 1.0]).matvec(&b).unwrap(), b.to_vec());
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
        let u = Matrix::column(&[1.0, 2.0]);
        let v = Matrix::column(&[1.0, 0.0, -1.0]);
        assert_eq!(kron(&u, &v).shape(), (6, 1));

        // (X ⊗ I)(e0 ⊗ e1) = e1 ⊗ e1
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let op = kron(&x, &Matrix::identity(2));
        let e0e1 = kron(&Matrix::column(&[1.0, 0.0]), &Matrix::column(&[0.0, 1.0]));
        let e1e1 = kron(&Matrix::column(&[0.0, 1.0]), &Matrix::column(&[0.0, 1.0]));
        assert_eq!(op.matvec(e0e1.data()).unwrap(), e1e1.data().to_vec());
    }

    #[test]
    fn solve_and_inverse() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).max_abs_diff(&Matrix::identity(2)) < 1e-15);
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(s.inverse(), Err(Error::Singular)));
    }

    #[test]
    fn json_accepts_scaled_identity_shorthand() {
        let m: Matrix = serde_json::from_str(r#"{"kind":"scaled_identity","dim":3,"scale":0.5}"#).unwrap();
        assert_eq!(m, Matrix::scaled_identity(3, 0.5));
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains(r#""kind":"real""#));
        let back: Matrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Matrix>(r#"{"kind":"real","rows":2,"cols":2,"data":[1]}"#).is_err());
    }
}

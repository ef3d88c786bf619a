//! Dense complex matrices and the factorizations the rest of the crate is
//! built from.
//!
//! Storage is column-major everywhere in the crate. Every factorization is a
//! pure, sequential function of its input, so identical inputs produce
//! bit-identical outputs.

mod cholesky;
mod qr;
pub(crate) mod svd;
mod triangular;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

pub use cholesky::cholesky_factor;
pub use qr::{qr_factor, qr_factor_full, qr_pivoted, PivotedQr, QrFactors};
pub use svd::{singular_values, spectral_norm, svd_factor, SvdFactors};
pub use triangular::{solve_triangular, Side, Trans};

use crate::error::{Error, Result};

/// Unit roundoff for IEEE double precision, `2^-53`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Default constant `c` in the tolerances `c * n * u` used across the crate.
pub const DEFAULT_TOL_CONSTANT: f64 = 50.0;

/// Tolerance of the form `c * n * u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub c: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            c: DEFAULT_TOL_CONSTANT,
        }
    }
}

impl Tolerance {
    pub fn new(c: f64) -> Self {
        Self { c }
    }

    /// `c * n * u`
    pub fn at(&self, n: usize) -> f64 {
        self.c * n.max(1) as f64 * UNIT_ROUNDOFF
    }
}

/// Dense complex matrix stored column-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, " {:+.4e}{:+.4e}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// Rectangular identity: ones on the main diagonal.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn real_diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self + s * I` for square matrices.
    pub fn shift_diag(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] += s;
        }
        out
    }

    /// `a * self + b * other`
    pub fn axpby(&self, a: f64, other: &Matrix, b: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "axpby shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| x * a + y * b)
                .collect(),
        }
    }

    /// Hermitian part `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square(), "hermitian_part needs a square matrix");
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
            out[(j, j)].im = 0.0;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        let s: f64 = self.data.iter().map(|z| (z / scale).norm_sqr()).sum();
        scale * s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (s, z) in sums.iter_mut().zip(self.col(j)) {
                *s += z.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_off_diag(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                if i != j {
                    m = m.max(self[(i, j)].norm());
                }
            }
        }
        m
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "submatrix out of range");
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn rows_range(&self, r0: usize, nr: usize) -> Self {
        self.submatrix(r0, 0, nr, self.cols)
    }

    pub fn cols_range(&self, c0: usize, nc: usize) -> Self {
        assert!(c0 + nc <= self.cols, "column range out of bounds");
        Self {
            rows: self.rows,
            cols: nc,
            data: self.data[c0 * self.rows..(c0 + nc) * self.rows].to_vec(),
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for j in 0..block.cols {
            for i in 0..block.rows {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn vstack(top: &Matrix, bottom: &Matrix) -> Self {
        assert_eq!(top.cols, bottom.cols, "vstack column mismatch");
        let mut out = Self::zeros(top.rows + bottom.rows, top.cols);
        out.set_block(0, 0, top);
        out.set_block(top.rows, 0, bottom);
        out
    }

    pub fn hstack(left: &Matrix, right: &Matrix) -> Self {
        assert_eq!(left.rows, right.rows, "hstack row mismatch");
        let mut data = left.data.clone();
        data.extend_from_slice(&right.data);
        Self {
            rows: left.rows,
            cols: left.cols + right.cols,
            data,
        }
    }

    /// Multiplies column `j` by `s` in place.
    pub fn scale_col(&mut self, j: usize, s: C64) {
        for z in self.col_mut(j) {
            *z *= s;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul inner dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let m = self.rows;
        let mut out = Self::zeros(m, other.cols);
        for j in 0..other.cols {
            let oc = &mut out.data[j * m..(j + 1) * m];
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == ZERO {
                    continue;
                }
                let ac = &self.data[k * m..(k + 1) * m];
                for (o, &a) in oc.iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^* * other`
    pub fn adjoint_mul(&self, other: &Matrix) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_mul row mismatch");
        Self::from_fn(self.cols, other.cols, |i, j| dotc(self.col(i), other.col(j)))
    }

    /// `self * other^*`
    pub fn mul_adjoint(&self, other: &Matrix) -> Self {
        self.matmul(&other.adjoint())
    }

    /// `self^* * self`, exactly Hermitian.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = dotc(self.col(i), self.col(j));
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
            out[(j, j)].im = 0.0;
        }
        out
    }

    /// `|| self^* self - I ||_2`
    pub fn orthogonality_error(&self) -> f64 {
        spectral_norm(&self.gram().shift_diag(-1.0))
    }

    /// `|| self^* self - I ||_F`
    pub fn orthogonality_error_fro(&self) -> f64 {
        self.gram().shift_diag(-1.0).frobenius_norm()
    }
}

/// Conjugated dot product `x^* y`.
pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

pub fn norm2(x: &[C64]) -> f64 {
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = x.iter().map(|z| (z / scale).norm_sqr()).sum();
    scale * s.sqrt()
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.axpby(1.0, rhs, 1.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.axpby(1.0, rhs, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn column_major_layout() {
        let m = Matrix::from_row_major(2, 3, &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.), c(5., 0.), c(6., 0.)]).unwrap();
        assert_eq!(m.col(0), &[c(1., 0.), c(4., 0.)]);
        assert_eq!(m.to_row_major()[2], c(3., 0.));
        assert_eq!(m[(1, 2)], c(6., 0.));
    }

    #[test]
    fn products_agree() {
        let a = Matrix::from_fn(4, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.5));
        let b = Matrix::from_fn(4, 2, |i, j| c(1.0 + i as f64, j as f64 - 0.25));
        let x = a.adjoint_mul(&b);
        let y = a.adjoint().matmul(&b);
        assert!((&x - &y).max_abs() < 1e-13);
        let g = a.gram();
        assert!((&g - &a.adjoint().matmul(&a)).max_abs() < 1e-13);
        assert_eq!(g, g.adjoint());
    }

    #[test]
    fn norms() {
        let m = Matrix::from_real_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert!((m.frobenius_norm() - 5.0).abs() < 1e-15);
        assert_eq!(m.norm_1(), 4.0);
        assert_eq!(m.norm_inf(), 4.0);
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stacking() {
        let a = Matrix::identity(2);
        let b = Matrix::zeros(3, 2);
        let s = Matrix::vstack(&a, &b);
        assert_eq!(s.shape(), (5, 2));
        assert_eq!(s.rows_range(0, 2), a);
        let h = Matrix::hstack(&s, &s);
        assert_eq!(h.cols_range(2, 2), s);
        assert_eq!(h.select_cols(&[3]).col(0), s.col(1));
    }

    #[test]
    fn bad_lengths_rejected() {
        assert!(Matrix::from_col_major(2, 2, vec![ZERO; 3]).is_err());
    }
}

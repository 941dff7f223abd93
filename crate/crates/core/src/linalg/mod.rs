//! Dense complex linear algebra over small Hilbert spaces.
//!
//! Matrices are stored row-major. Sites of a register are ordered with site 0
//! as the most significant digit of a basis index, so a basis state
//! `|i_0 i_1 ... i_{n-1}>` sits at `sum_k i_k * d^(n-1-k)`.

mod eig;
mod ops;
mod svd;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

pub use eig::{hermitian_eig, hermitian_eig_with, HermitianEigen};
pub use ops::{
    embed_operator, gram_schmidt_extend, numerical_rank, operator_norm, partial_trace,
    trace_distance, trace_norm,
};
pub use svd::{svd, Svd};

pub type C64 = num_complex::Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Numerical tolerances shared by the Hermiticity, normalization, rank and
/// positivity checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceConfig {
    pub hermitian_tol: f64,
    pub norm_tol: f64,
    pub rank_tol: f64,
    pub psd_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            hermitian_tol: 1e-9,
            norm_tol: 1e-10,
            rank_tol: 1e-10,
            psd_tol: 1e-9,
        }
    }
}

impl ToleranceConfig {
    pub fn is_valid(&self) -> bool {
        [self.hermitian_tol, self.norm_tol, self.rank_tol, self.psd_tol]
            .iter()
            .all(|t| t.is_finite() && *t >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    data: Vec<C64>,
}

impl ComplexVector {
    pub fn zeros(dim: usize) -> Self {
        Self { data: vec![ZERO; dim] }
    }

    /// Computational basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[k] = ONE;
        v
    }

    pub fn from_vec(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn from_reals(values: &[f64]) -> Self {
        Self { data: values.iter().map(|&x| real(x)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn iter(&self) -> core::slice::Iter<'_, C64> {
        self.data.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { data: self.data.iter().map(|z| z * factor).collect() }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: C64, x: &Self) {
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    /// Returns the normalized vector, or `None` for a (numerically) zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n <= f64::MIN_POSITIVE {
            None
        } else {
            Some(self.scaled(real(1.0 / n)))
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }

    /// Multiplies by a global phase so that the largest-magnitude entry
    /// (first one on near-ties) is real and positive.
    pub fn phase_normalize(&mut self) {
        let max = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return;
        }
        let pivot = self
            .data
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        let z = self.data[pivot];
        let phase = z.conj() / z.norm();
        for entry in &mut self.data {
            *entry *= phase;
        }
        self.data[pivot] = real(self.data[pivot].norm());
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `|self><self|`
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(self, self)
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major construction; panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = real(v);
        }
        m
    }

    pub fn from_columns(cols: &[ComplexVector]) -> Self {
        let rows = cols.first().map_or(0, ComplexVector::len);
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r])
    }

    pub fn from_rows(rows: &[ComplexVector]) -> Self {
        let cols = rows.first().map_or(0, ComplexVector::len);
        Self::from_fn(rows.len(), cols, |r, c| rows[r][c])
    }

    /// `|a><b|`
    pub fn outer(a: &ComplexVector, b: &ComplexVector) -> Self {
        Self::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> ComplexVector {
        ComplexVector::from_vec((0..self.rows).map(|r| self[(r, c)]).collect())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension");
        ComplexVector::from_vec(
            (0..self.rows)
                .map(|r| self.row(r).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `<a| self |b>`
    pub fn sandwich(&self, a: &ComplexVector, b: &ComplexVector) -> C64 {
        a.inner(&self.mul_vec(b))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Self::from_fn(rows, cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    pub fn scale_mut(&mut self, factor: C64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut m = self.clone();
        m.scale_mut(factor);
        m
    }

    /// `(A + A^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        let mut h = self + &self.adjoint();
        h.scale_mut(real(0.5));
        h
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Sub-matrix `rows x cols` picked by index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// `d^k` with overflow reported as `None`.
pub fn checked_pow(d: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..k {
        acc = acc.checked_mul(d)?;
    }
    Some(acc)
}

/// Digits of `index` in base `d`, most significant first, over `len` places.
pub fn to_digits(mut index: usize, d: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for slot in digits.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    digits
}

pub fn from_digits(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &x| acc * d + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        let i3 = ComplexMatrix::identity(3);
        assert_eq!(i2.kron(&i3), ComplexMatrix::identity(6));
    }

    #[test]
    fn phase_normalize_makes_pivot_positive_real() {
        let mut v = ComplexVector::from_vec(vec![C64::new(0.1, 0.0), C64::new(0.0, -0.9)]);
        v.phase_normalize();
        assert!((v[1] - real(0.9)).norm() < 1e-15);
        assert!((v[0] - C64::new(0.0, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn digits_round_trip() {
        for idx in 0..27 {
            assert_eq!(from_digits(&to_digits(idx, 3, 3), 3), idx);
        }
        assert_eq!(to_digits(6, 2, 3), vec![1, 1, 0]);
    }
}

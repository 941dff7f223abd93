use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{real, ComplexMatrix, ComplexVector, ToleranceConfig, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `A = sum_i values[i] |vectors[i]><vectors[i]|`.
///
/// Eigenvalues are sorted in descending order. Inside a cluster of
/// (numerically) equal eigenvalues, vectors are ordered lexicographically by
/// their phase-normalized entries, larger entries first. Every vector is
/// phase-normalized (largest-magnitude entry real positive).
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let dim = self.vectors.first().map_or(0, ComplexVector::len);
        let mut out = ComplexMatrix::zeros(dim, dim);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            for r in 0..dim {
                let vr = v[r] * lambda;
                for c in 0..dim {
                    out[(r, c)] += vr * v[c].conj();
                }
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen> {
    hermitian_eig_with(a, &ToleranceConfig::default())
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eig_with(a: &ComplexMatrix, tol: &ToleranceConfig) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    let deviation = a.hermitian_deviation();
    if deviation > tol.hermitian_tol * a.max_abs().max(1.0) {
        return Err(Error::NonHermitian { deviation, tolerance: tol.hermitian_tol });
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();

    let mut converged = n <= 1 || scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&m) <= 1e-15 * scale;
    }

    let mut pairs: Vec<(f64, ComplexVector)> = (0..n)
        .map(|i| {
            let mut vec = v.column(i);
            vec.phase_normalize();
            (m[(i, i)].re, vec)
        })
        .collect();
    sort_spectrum(&mut pairs, scale);
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += m[(r, c)].norm_sqr();
            }
        }
    }
    libm::sqrt(acc)
}

/// Annihilates `m[(p, q)]` with `m <- R^dagger m R`, `v <- v R`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let magnitude = apq.norm();
    if magnitude <= f64::MIN_POSITIVE {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let (c, s, phase) = jacobi_parameters(app, aqq, apq);
    let n = m.rows();

    // columns: m <- m R with R = [[c, s], [-s conj(u), c conj(u)]]
    let sp = real(s) * phase.conj();
    let cp = real(c) * phase.conj();
    for r in 0..n {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = mp * c - mq * sp;
        m[(r, q)] = mp * s + mq * cp;
        let vp = v[(r, p)];
        let vq = v[(r, q)];
        v[(r, p)] = vp * c - vq * sp;
        v[(r, q)] = vp * s + vq * cp;
    }
    // rows: m <- R^dagger m
    for col in 0..n {
        let mp = m[(p, col)];
        let mq = m[(q, col)];
        m[(p, col)] = mp * c - mq * sp.conj();
        m[(q, col)] = mp * s + mq * cp.conj();
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = real(m[(p, p)].re);
    m[(q, q)] = real(m[(q, q)].re);
}

/// Rotation parameters `(c, s, u)` diagonalizing the Hermitian 2x2 block
/// `[[app, apq], [conj(apq), aqq]]`, where `u = apq / |apq|`.
pub(crate) fn jacobi_parameters(app: f64, aqq: f64, apq: C64) -> (f64, f64, C64) {
    let magnitude = apq.norm();
    let phase = apq / magnitude;
    let theta = (aqq - app) / (2.0 * magnitude);
    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
    let t = sign / (theta.abs() + libm::sqrt(1.0 + theta * theta));
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    (c, t * c, phase)
}

fn sort_spectrum(pairs: &mut [(f64, ComplexVector)], scale: f64) {
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tie = 1e-12 * scale.max(1.0);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[start].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }
}

fn lexicographic(a: &ComplexVector, b: &ComplexVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

use alloc::vec::Vec;

use super::eig::jacobi_parameters;
use super::{gram_schmidt_extend, real, ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Thin singular value decomposition `A = U diag(s) V^dagger`.
///
/// `u` is `m x k`, `v` is `n x k` with `k = min(m, n)`, both with orthonormal
/// columns; `s` is sorted in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for c in 0..us.cols() {
            for r in 0..us.rows() {
                us[(r, c)] *= self.s[c];
            }
        }
        us.matmul(&self.v.adjoint())
    }

    /// Number of singular values above `tol * s_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let max = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&x| x > tol * max && x > 0.0).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = svd(&a.adjoint())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let m = a.rows();
    let n = a.cols();
    let mut cols: Vec<ComplexVector> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<ComplexVector> = (0..n).map(|c| ComplexVector::basis(n, c)).collect();

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = cols[p].norm_sqr();
                let beta = cols[q].norm_sqr();
                let gamma = cols[p].inner(&cols[q]);
                if gamma.norm() <= 1e-15 * libm::sqrt(alpha * beta) || gamma.norm() < 1e-300 {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_parameters(alpha, beta, gamma);
                let sp = real(s) * phase.conj();
                let cp = real(c) * phase.conj();
                rotate_pair(&mut cols, p, q, c, s, sp, cp);
                rotate_pair(&mut v, p, q, c, s, sp, cp);
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
    }

    let mut order: Vec<(f64, usize)> = cols.iter().map(|c| c.norm()).zip(0..n).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let s: Vec<f64> = order.iter().map(|(sigma, _)| *sigma).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<ComplexVector> = Vec::with_capacity(n);
    for (sigma, idx) in &order {
        if *sigma > 1e-14 * smax && *sigma > 0.0 {
            u_cols.push(cols[*idx].scaled(real(1.0 / sigma)));
        } else {
            break;
        }
    }
    if u_cols.len() < n {
        let full = gram_schmidt_extend(&u_cols, m, 0x5eed)?;
        u_cols = full.into_iter().take(n).collect();
    }
    let v_cols: Vec<ComplexVector> = order.iter().map(|(_, idx)| v[*idx].clone()).collect();
    Ok(Svd {
        u: ComplexMatrix::from_columns(&u_cols),
        s,
        v: ComplexMatrix::from_columns(&v_cols),
    })
}

fn rotate_pair(cols: &mut [ComplexVector], p: usize, q: usize, c: f64, s: f64, sp: C64, cp: C64) {
    let len = cols[p].len();
    for r in 0..len {
        let xp = cols[p][r];
        let xq = cols[q][r];
        cols[p][r] = xp * c - xq * sp;
        cols[q][r] = xp * s + xq * cp;
    }
}

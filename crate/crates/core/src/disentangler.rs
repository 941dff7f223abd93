//! Disentangling unitaries built from block-state estimates.
//!
//! Both constructions order an orthonormal basis `phi_1, ..., phi_{d^y}` so
//! that the chosen eigenvectors come first, then set
//! `U = sum_k |k - 1><phi_k|`. Because the index map `idx` agrees with the
//! row-major index of `|a_1 .. a_{y-q}> (x) |j>`, the matrix `U` does not
//! depend on how many qudits `q` are kept, and zero-projecting the leading
//! `y - q` qudits keeps exactly `span(phi_1, ..., phi_{d^q})`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{checked_pow, gram_schmidt_extend, hermitian_eig, ComplexMatrix, ComplexVector};

/// Eigenvalues within this margin of the threshold count as not above it.
pub const THRESHOLD_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Disentangler {
    pub unitary: ComplexMatrix,
    pub d: usize,
    pub y: usize,
    /// `p` for the rank-capped construction, `t` for the threshold one.
    pub kept_qudits: usize,
    /// Orthonormal vectors spanning the selected eigenspace.
    pub selected: Vec<ComplexVector>,
    /// Eigenvalues of the estimate, descending.
    pub spectrum: Vec<f64>,
}

impl Disentangler {
    /// Wraps an explicit unitary, e.g. one read back from a file.
    pub fn from_unitary(unitary: ComplexMatrix, d: usize, kept_qudits: usize) -> Result<Self> {
        let y = qudit_count(unitary.rows(), d)?;
        if !unitary.is_square() {
            return Err(Error::NonSquare { rows: unitary.rows(), cols: unitary.cols() });
        }
        if kept_qudits > y {
            return Err(Error::BadParameter(format!("keeps {kept_qudits} of {y} qudits")));
        }
        let dev = unitary.adjoint().matmul(&unitary).max_abs_diff(&ComplexMatrix::identity(unitary.rows()));
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Disentangler { unitary, d, y, kept_qudits, selected: Vec::new(), spectrum: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.unitary.rows()
    }

    pub fn kept_dim(&self) -> usize {
        self.d.pow(self.kept_qudits as u32)
    }

    /// `phi_k` for `k = 0..dim`, i.e. the conjugated rows of `U`.
    pub fn basis_vector(&self, k: usize) -> ComplexVector {
        ComplexVector::from_vec(self.unitary.row(k).iter().map(|x| x.conj()).collect())
    }

    /// Projector onto the space that survives zero-projecting all but the
    /// last `q` qudits after `U`.
    pub fn kept_projector(&self, q: usize) -> ComplexMatrix {
        let keep = self.d.pow(q.min(self.y) as u32);
        let dim = self.dim();
        let mut out = ComplexMatrix::zeros(dim, dim);
        for k in 0..keep {
            out = &out + &self.basis_vector(k).projector();
        }
        out
    }

    pub fn selected_projector(&self) -> ComplexMatrix {
        let dim = self.dim();
        self.selected
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, v| &acc + &v.projector())
    }

    pub fn unitarity_error(&self) -> f64 {
        self.unitary
            .adjoint()
            .matmul(&self.unitary)
            .max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }
}

fn qudit_count(dim: usize, d: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::BadParameter(format!("local dimension {d} < 2")));
    }
    let mut y = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc = acc.saturating_mul(d);
        y += 1;
    }
    if acc != dim {
        return Err(Error::DimensionMismatch(format!("{dim} is not a power of {d}")));
    }
    Ok(y)
}

/// One-based position of basis vector `|a_1 .. a_{y-p}> (x) |j>`:
/// `j + d^p * sum_l a_l d^{y-p-l}`.
pub fn idx(a: &[usize], j: usize, d: usize, y: usize, p: usize) -> Result<usize> {
    if p > y || a.len() != y - p {
        return Err(Error::OutOfRange(format!("{} leading digits for y = {y}, p = {p}", a.len())));
    }
    let block = checked_pow(d, p).ok_or_else(|| Error::OutOfRange(format!("{d}^{p} overflows")))?;
    if j == 0 || j > block {
        return Err(Error::OutOfRange(format!("j = {j} outside 1..={block}")));
    }
    let mut lead = 0usize;
    for &digit in a {
        if digit >= d {
            return Err(Error::OutOfRange(format!("digit {digit} not below {d}")));
        }
        lead = lead * d + digit;
    }
    Ok(j + block * lead)
}

fn assemble(chosen: Vec<ComplexVector>, dim: usize, seed: u64) -> Result<ComplexMatrix> {
    let basis = gram_schmidt_extend(&chosen, dim, seed)?;
    Ok(ComplexMatrix::from_fn(dim, dim, |k, c| basis[k][c].conj()))
}

/// Rank-capped construction: the top `bond_sq` eigenvectors of `sigma_hat`
/// go first and `p` qudits are kept.
pub fn build_rank_capped(sigma_hat: &ComplexMatrix, d: usize, bond_sq: usize, p: usize, seed: u64) -> Result<Disentangler> {
    let dim = sigma_hat.rows();
    let y = qudit_count(dim, d)?;
    if bond_sq > dim {
        return Err(Error::RankCapExceedsDim { cap: bond_sq, dim });
    }
    if p > y {
        return Err(Error::BadParameter(format!("keeps {p} of {y} qudits")));
    }
    let kept = d.pow(p as u32);
    if kept < bond_sq {
        return Err(Error::BadParameter(format!("kept dimension {kept} below rank cap {bond_sq}")));
    }
    let eig = hermitian_eig(sigma_hat)?;
    let selected: Vec<ComplexVector> = eig.vectors[..bond_sq].to_vec();
    let unitary = assemble(selected.clone(), dim, seed)?;
    Ok(Disentangler { unitary, d, y, kept_qudits: p, selected, spectrum: eig.values })
}

/// Threshold construction: eigenvectors with eigenvalue above `eta` go
/// first and `t = ceil(log_d m)` qudits are kept.
///
/// With nothing above the threshold, `t = 0` and the basis is the seeded
/// completion of the empty set.
pub fn build_threshold(sigma_hat: &ComplexMatrix, d: usize, eta: f64, seed: u64) -> Result<Disentangler> {
    let dim = sigma_hat.rows();
    let y = qudit_count(dim, d)?;
    if !(eta > 0.0) {
        return Err(Error::BadParameter(format!("threshold {eta} must be positive")));
    }
    let tr = sigma_hat.trace().re;
    if tr > 1.0 + 1e-9 {
        return Err(Error::BadParameter(format!("trace {tr} exceeds one")));
    }
    let eig = hermitian_eig(sigma_hat)?;
    let m = eig.values.iter().filter(|&&a| a > eta + THRESHOLD_MARGIN).count();
    let selected: Vec<ComplexVector> = eig.vectors[..m].to_vec();
    let t = ceil_log(m, d);
    let unitary = assemble(selected.clone(), dim, seed)?;
    Ok(Disentangler { unitary, d, y, kept_qudits: t, selected, spectrum: eig.values })
}

/// `ceil(log_d m)`, zero for `m <= 1`.
pub fn ceil_log(m: usize, d: usize) -> usize {
    let mut t = 0;
    let mut acc = 1usize;
    while acc < m {
        acc = acc.saturating_mul(d);
        t += 1;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{operator_norm, real, trace_distance, trace_norm, to_digits};
    use crate::rng;

    fn failure_mass(w: &ComplexMatrix, sigma: &ComplexMatrix) -> f64 {
        let complement = &ComplexMatrix::identity(sigma.rows()) - w;
        complement.matmul(sigma).trace().re
    }

    #[test]
    fn idx_values() {
        assert_eq!(idx(&[0, 0], 1, 2, 3, 1).unwrap(), 1);
        assert_eq!(idx(&[1, 0], 2, 2, 3, 1).unwrap(), 6);
        assert!(matches!(idx(&[2, 0], 1, 2, 3, 1), Err(Error::OutOfRange(_))));
        assert!(matches!(idx(&[0, 0], 3, 2, 3, 1), Err(Error::OutOfRange(_))));
        assert!(matches!(idx(&[0], 1, 2, 3, 1), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn idx_is_a_bijection_matching_row_major_order() {
        for (d, y) in [(2usize, 3usize), (2, 6), (3, 4), (4, 3), (2, 12), (4, 6)] {
            for p in 0..=y {
                let dim = d.pow(y as u32);
                let mut hit = alloc::vec![false; dim];
                let block = d.pow(p as u32);
                for lead in 0..d.pow((y - p) as u32) {
                    let a = to_digits(lead, d, y - p);
                    for j in 1..=block {
                        let k = idx(&a, j, d, y, p).unwrap();
                        // one-based index equals row-major position plus one
                        assert_eq!(k, lead * block + (j - 1) + 1);
                        assert!(!hit[k - 1]);
                        hit[k - 1] = true;
                    }
                }
                assert!(hit.iter().all(|&h| h));
            }
        }
    }

    #[test]
    fn aligned_rank_one_state() {
        let sigma = ComplexVector::basis(8, 0).projector();
        let dis = build_rank_capped(&sigma, 2, 1, 0, 0).unwrap();
        let kept = dis.kept_projector(0);
        assert!((kept.matmul(&sigma).trace().re - 1.0).abs() < 1e-14);
        assert!(dis.unitarity_error() < 1e-12);
    }

    #[test]
    fn uniform_mixture_of_four_vectors_passes_fully() {
        let mut r = rng::seeded(44);
        let u = rng::random_unitary(&mut r, 16);
        let mut sigma = ComplexMatrix::zeros(16, 16);
        for k in 0..4 {
            sigma = &sigma + &u.column(k).projector().scaled(real(0.25));
        }
        let dis = build_rank_capped(&sigma, 2, 4, 2, 1).unwrap();
        assert!(failure_mass(&dis.kept_projector(2), &sigma).abs() < 1e-10);
        // U sends the selected space onto |00> (x) C^4
        for v in &dis.selected {
            let image = dis.unitary.mul_vec(v);
            assert!(image.iter().skip(4).all(|x| x.norm() < 1e-10));
        }
    }

    #[test]
    fn rank_cap_errors() {
        let sigma = ComplexMatrix::identity(4).scaled(real(0.25));
        assert!(matches!(build_rank_capped(&sigma, 2, 5, 2, 0), Err(Error::RankCapExceedsDim { .. })));
        let mut bad = sigma.clone();
        bad[(0, 1)] = real(0.3);
        assert!(matches!(build_rank_capped(&bad, 2, 1, 1, 0), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn noisy_estimate_obeys_eckart_young() {
        let mut r = rng::seeded(5);
        for trial in 0..20u64 {
            let sigma = rng::random_density_matrix(&mut r, 16, 4);
            let mut delta = rng::random_hermitian(&mut r, 16);
            let shift = delta.trace() / 16.0;
            for k in 0..16 {
                delta[(k, k)] -= shift;
            }
            let size = trace_norm(&delta).unwrap();
            let sigma_hat = &sigma + &delta.scaled(real(1e-3 / size));
            assert!((trace_distance(&sigma, &sigma_hat).unwrap() - 1e-3).abs() < 1e-12);
            let dis = build_rank_capped(&sigma_hat, 2, 4, 2, trial).unwrap();
            assert!(failure_mass(&dis.selected_projector(), &sigma) <= 2e-3);
        }
    }

    #[test]
    fn kept_space_contains_selected_space() {
        let mut r = rng::seeded(8);
        // rank cap 2 with 2 kept qubits: kept space is 4-dimensional
        let sigma = rng::random_density_matrix(&mut r, 16, 3);
        let dis = build_rank_capped(&sigma, 2, 2, 2, 3).unwrap();
        let w = dis.kept_projector(2);
        let tilde = dis.selected_projector();
        assert!(w.matmul(&tilde).max_abs_diff(&tilde) < 1e-10);
    }

    #[test]
    fn threshold_count() {
        let sigma = ComplexMatrix::from_diagonal(&[0.6, 0.3, 0.08, 0.02]);
        // 0.08 is above 0.05, so three eigenvalues survive
        let dis = build_threshold(&sigma, 2, 0.05, 0).unwrap();
        assert_eq!(dis.selected.len(), 3);
        assert_eq!(dis.kept_qudits, 2);
        let dis = build_threshold(&sigma, 2, 0.1, 0).unwrap();
        assert_eq!(dis.selected.len(), 2);
        assert_eq!(dis.kept_qudits, 1);
        assert_eq!(dis.kept_dim(), 2);
    }

    #[test]
    fn threshold_margin_excludes_ties() {
        let sigma = ComplexMatrix::from_diagonal(&[0.5, 0.25, 0.25]);
        let dis = build_threshold(&sigma.select(&[0, 1, 2], &[0, 1, 2]), 3, 0.25, 0).unwrap();
        assert_eq!(dis.selected.len(), 1);
        assert_eq!(dis.kept_qudits, 0);
    }

    #[test]
    fn empty_selection_is_total() {
        let sigma = ComplexMatrix::identity(8).scaled(real(0.125));
        let dis = build_threshold(&sigma, 2, 0.2, 7).unwrap();
        assert!(dis.selected.is_empty());
        assert_eq!(dis.kept_qudits, 0);
        assert!(dis.unitarity_error() < 1e-12);
    }

    #[test]
    fn threshold_selection_count_below_inverse_eta() {
        let mut r = rng::seeded(9);
        for trial in 0..100 {
            let rank = 1 + trial % 8;
            let sigma = rng::random_density_matrix(&mut r, 8, rank);
            for eta in [0.01, 0.05, 0.1, 0.3] {
                let dis = build_threshold(&sigma, 2, eta, 0).unwrap();
                assert!((dis.selected.len() as f64) < 1.0 / eta);
            }
        }
    }

    #[test]
    fn threshold_operator_norm_bound() {
        let mut r = rng::seeded(10);
        for eta in [1e-1, 1e-2, 1e-3] {
            for _ in 0..10 {
                let sigma = rng::random_density_matrix(&mut r, 8, 3);
                let mut delta = rng::random_hermitian(&mut r, 8);
                let shift = delta.trace() / 8.0;
                for k in 0..8 {
                    delta[(k, k)] -= shift;
                }
                let size = trace_norm(&delta).unwrap();
                let sigma_hat = &sigma + &delta.scaled(real(eta / size));
                let dis = build_threshold(&sigma_hat, 2, eta, 0).unwrap();
                let complement = &ComplexMatrix::identity(8) - &dis.selected_projector();
                let residual = complement.matmul(&sigma).matmul(&complement);
                assert!(operator_norm(&residual).unwrap() <= 2.0 * eta);
            }
        }
    }

    #[test]
    fn threshold_rejects_supernormalized_input() {
        let sigma = ComplexMatrix::identity(2);
        assert!(matches!(build_threshold(&sigma, 2, 0.1, 0), Err(Error::BadParameter(_))));
    }

    #[test]
    fn dimension_must_be_a_power() {
        let sigma = ComplexMatrix::identity(6).scaled(real(1.0 / 6.0));
        assert!(matches!(build_rank_capped(&sigma, 2, 1, 1, 0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ceil_log_values() {
        assert_eq!(ceil_log(0, 2), 0);
        assert_eq!(ceil_log(1, 2), 0);
        assert_eq!(ceil_log(2, 2), 1);
        assert_eq!(ceil_log(5, 2), 3);
        assert_eq!(ceil_log(9, 3), 2);
        assert_eq!(ceil_log(10, 3), 3);
    }
}

//! The register the learner shrinks layer by layer.
//!
//! Pure inputs stay vectors (conditioning on a projector keeps them pure),
//! mixed inputs stay density matrices. Either may be sub-normalized once a
//! projection has been applied.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{checked_pow, ComplexMatrix, ComplexVector, C64, ZERO};
use crate::mps::{block_rdm, StateRef};

/// Largest pure register, in amplitudes.
pub const MAX_PURE_AMPLITUDES: usize = 1 << 20;
/// Largest mixed register, in matrix dimension (ten qubits).
pub const MAX_MIXED_DIM: usize = 1 << 10;

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    Pure(ComplexVector),
    Mixed(ComplexMatrix),
}

impl Backend {
    pub fn dim(&self) -> usize {
        match self {
            Backend::Pure(v) => v.len(),
            Backend::Mixed(m) => m.rows(),
        }
    }

    pub fn as_ref(&self) -> StateRef<'_> {
        match self {
            Backend::Pure(v) => StateRef::Pure(v),
            Backend::Mixed(m) => StateRef::Mixed(m),
        }
    }

    /// Squared norm or trace.
    pub fn mass(&self) -> f64 {
        match self {
            Backend::Pure(v) => v.norm_sqr(),
            Backend::Mixed(m) => m.trace().re,
        }
    }

    /// Density operator, expanded from a vector if necessary.
    pub fn density(&self) -> ComplexMatrix {
        match self {
            Backend::Pure(v) => v.projector(),
            Backend::Mixed(m) => m.clone(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Backend::Pure(_))
    }

    /// `<phi| state |phi>`.
    pub fn expectation(&self, phi: &ComplexVector) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} on dimension {}", phi.len(), self.dim())));
        }
        Ok(match self {
            Backend::Pure(v) => phi.inner(v).norm_sqr(),
            Backend::Mixed(m) => m.sandwich(phi, phi).re,
        })
    }
}

/// A register of qudits with their original site labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub d: usize,
    pub sites: Vec<usize>,
    pub state: Backend,
}

impl Register {
    pub fn pure(psi: ComplexVector, d: usize) -> Result<Self> {
        let n = qudits(psi.len(), d)?;
        if psi.len() > MAX_PURE_AMPLITUDES {
            return Err(Error::BackendTooLarge(format!("{} amplitudes exceed {MAX_PURE_AMPLITUDES}", psi.len())));
        }
        Ok(Register { d, sites: (0..n).collect(), state: Backend::Pure(psi) })
    }

    pub fn mixed(rho: ComplexMatrix, d: usize) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::NonSquare { rows: rho.rows(), cols: rho.cols() });
        }
        let n = qudits(rho.rows(), d)?;
        if rho.rows() > MAX_MIXED_DIM {
            return Err(Error::BackendTooLarge(format!("density matrix of dimension {} exceeds {MAX_MIXED_DIM}", rho.rows())));
        }
        Ok(Register { d, sites: (0..n).collect(), state: Backend::Mixed(rho) })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.d; self.sites.len()]
    }

    /// Reduced state on register positions `offset..offset + len`.
    pub fn block_state(&self, offset: usize, len: usize) -> Result<ComplexMatrix> {
        let block: Vec<usize> = (offset..offset + len).collect();
        block_rdm(self.state.as_ref(), &self.dims(), &block)
    }

    /// Applies `op: C^{d^len} -> C^{d^out}` to positions `offset..offset + len`
    /// and relabels them with `new_sites`.
    pub fn apply(&mut self, op: &ComplexMatrix, offset: usize, len: usize, new_sites: &[usize]) -> Result<()> {
        let n = self.len();
        let state = core::mem::replace(&mut self.state, Backend::Pure(ComplexVector::zeros(0)));
        let applied = apply_to_state(&state, self.d, n, op, offset, len);
        let next = match applied {
            Ok(s) => s,
            Err(e) => {
                self.state = state;
                return Err(e);
            }
        };
        if checked_pow(self.d, n - len + new_sites.len()) != Some(next.dim()) {
            self.state = state;
            return Err(Error::DimensionMismatch(format!("{} new labels for output {}", new_sites.len(), op.rows())));
        }
        self.state = next;
        self.sites.splice(offset..offset + len, new_sites.iter().copied());
        Ok(())
    }
}

fn qudits(dim: usize, d: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::BadParameter(format!("local dimension {d} < 2")));
    }
    let mut n = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc = acc.saturating_mul(d);
        n += 1;
    }
    if acc != dim {
        return Err(Error::DimensionMismatch(format!("{dim} is not a power of {d}")));
    }
    Ok(n)
}

/// Applies a local operator to the row index of a row-major array with
/// `cols` columns whose rows are laid out as `(left, input, right)`.
fn apply_rows(data: &[C64], cols: usize, left: usize, right: usize, op: &ComplexMatrix) -> Vec<C64> {
    let (dout, din) = (op.rows(), op.cols());
    let mut out = vec![ZERO; left * dout * right * cols];
    let chunk = right * cols;
    for l in 0..left {
        let src = &data[l * din * chunk..(l + 1) * din * chunk];
        let dst = &mut out[l * dout * chunk..(l + 1) * dout * chunk];
        for a in 0..dout {
            let row = op.row(a);
            let target = &mut dst[a * chunk..(a + 1) * chunk];
            for (b, &w) in row.iter().enumerate() {
                if w == ZERO {
                    continue;
                }
                for (t, s) in target.iter_mut().zip(&src[b * chunk..(b + 1) * chunk]) {
                    *t += w * s;
                }
            }
        }
    }
    out
}

fn geometry(d: usize, n: usize, op: &ComplexMatrix, offset: usize, len: usize) -> Result<(usize, usize)> {
    if offset + len > n {
        return Err(Error::BlockOutOfRange { block: (offset..offset + len).collect(), sites: n });
    }
    let din = checked_pow(d, len).ok_or_else(|| Error::TooLarge(format!("{d}^{len}")))?;
    if op.cols() != din {
        return Err(Error::DimensionMismatch(format!("operator has {} columns for {len} sites", op.cols())));
    }
    let left = checked_pow(d, offset).ok_or_else(|| Error::TooLarge(format!("{d}^{offset}")))?;
    let right = checked_pow(d, n - offset - len).ok_or_else(|| Error::TooLarge(format!("{d}^{}", n - offset - len)))?;
    Ok((left, right))
}

/// `(I (x) op (x) I) psi` on a register of `n` qudits.
pub fn apply_to_vector(
    psi: &ComplexVector,
    d: usize,
    n: usize,
    op: &ComplexMatrix,
    offset: usize,
    len: usize,
) -> Result<ComplexVector> {
    let (left, right) = geometry(d, n, op, offset, len)?;
    if psi.len() != left * op.cols() * right {
        return Err(Error::DimensionMismatch(format!("vector of length {} on {n} sites", psi.len())));
    }
    Ok(ComplexVector::from_vec(apply_rows(psi.as_slice(), 1, left, right, op)))
}

/// `A rho A^dagger` with `A = I (x) op (x) I`.
pub fn apply_to_density(
    rho: &ComplexMatrix,
    d: usize,
    n: usize,
    op: &ComplexMatrix,
    offset: usize,
    len: usize,
) -> Result<ComplexMatrix> {
    let (left, right) = geometry(d, n, op, offset, len)?;
    let dim = left * op.cols() * right;
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix on {n} sites", rho.rows(), rho.cols())));
    }
    let out_dim = left * op.rows() * right;
    let half = ComplexMatrix::from_vec(out_dim, dim, apply_rows(rho.as_slice(), dim, left, right, op));
    let flipped = half.adjoint();
    let full = ComplexMatrix::from_vec(out_dim, out_dim, apply_rows(flipped.as_slice(), out_dim, left, right, op));
    Ok(full.adjoint())
}

pub fn apply_to_state(state: &Backend, d: usize, n: usize, op: &ComplexMatrix, offset: usize, len: usize) -> Result<Backend> {
    Ok(match state {
        Backend::Pure(v) => Backend::Pure(apply_to_vector(v, d, n, op, offset, len)?),
        Backend::Mixed(m) => Backend::Mixed(apply_to_density(m, d, n, op, offset, len)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_operator, real};
    use crate::rng;

    #[test]
    fn vector_map_matches_embedding() {
        let mut r = rng::seeded(3);
        let psi = rng::random_unit_vector(&mut r, 32);
        let u = rng::random_unitary(&mut r, 4);
        let got = apply_to_vector(&psi, 2, 5, &u, 2, 2).unwrap();
        let want = embed_operator(&u, &[2; 5], &[2, 3]).unwrap().mul_vec(&psi);
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn rectangular_density_map_matches_embedding() {
        let mut r = rng::seeded(4);
        let rho = rng::random_density_matrix(&mut r, 27, 3);
        let u = rng::random_unitary(&mut r, 9);
        // keep the rows with a leading zero digit: <0| (x) I after u
        let k = ComplexMatrix::from_fn(3, 9, |a, b| u[(a, b)]);
        let got = apply_to_density(&rho, 3, 3, &k, 1, 2).unwrap();
        let full = ComplexMatrix::identity(3).kron(&k);
        let want = full.matmul(&rho).matmul(&full.adjoint());
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn register_relabels_and_loses_mass() {
        let mut r = rng::seeded(5);
        let psi = rng::random_unit_vector(&mut r, 16);
        let mut reg = Register::pure(psi, 2).unwrap();
        let k = ComplexMatrix::from_fn(2, 4, |a, b| if a == b { real(1.0) } else { ZERO });
        reg.apply(&k, 0, 2, &[1]).unwrap();
        assert_eq!(reg.sites, vec![1, 2, 3]);
        assert_eq!(reg.state.dim(), 8);
        assert!(reg.state.mass() < 1.0);
        let rho = reg.state.density();
        let mut mixed = Register::mixed(rho.clone(), 2).unwrap();
        mixed.sites = reg.sites.clone();
        assert!((mixed.block_state(1, 2).unwrap().trace().re - reg.state.mass()).abs() < 1e-12);
    }

    #[test]
    fn bad_relabel_leaves_register_intact() {
        let mut reg = Register::pure(ComplexVector::basis(8, 0), 2).unwrap();
        let before = reg.clone();
        assert!(reg.apply(&ComplexMatrix::identity(4), 1, 2, &[1]).is_err());
        assert_eq!(reg, before);
    }

    #[test]
    fn limits() {
        assert!(matches!(
            Register::mixed(ComplexMatrix::identity(2048), 2),
            Err(Error::BackendTooLarge(_))
        ));
        assert!(Register::pure(ComplexVector::zeros(6), 2).is_err());
    }
}

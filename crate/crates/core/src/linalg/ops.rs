use alloc::format;
use alloc::vec::Vec;

use super::{hermitian_eig_with, real, svd, ComplexMatrix, ComplexVector, ToleranceConfig, C64, ZERO};
use crate::error::{Error, Result};
use crate::rng;

/// Schatten-1 norm: the sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.is_hermitian(1e-12 * a.max_abs().max(1.0)) {
        let eig = hermitian_eig_with(a, &ToleranceConfig::default())?;
        return Ok(eig.values.iter().map(|x| x.abs()).sum());
    }
    Ok(svd(a)?.s.iter().sum())
}

/// `||a - b||_1`
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    trace_norm(&(a - b))
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.is_hermitian(1e-12 * a.max_abs().max(1.0)) {
        let eig = hermitian_eig_with(a, &ToleranceConfig::default())?;
        return Ok(eig.max_value().abs().max(eig.min_value().abs()));
    }
    Ok(svd(a)?.s.first().copied().unwrap_or(0.0))
}

/// Number of eigenvalues strictly above `tol`.
pub fn numerical_rank(a: &ComplexMatrix, tol: f64) -> Result<usize> {
    let eig = hermitian_eig_with(a, &ToleranceConfig::default())?;
    Ok(eig.values.iter().filter(|&&x| x > tol).count())
}

fn check_dims(a: &ComplexMatrix, dims: &[usize]) -> Result<usize> {
    let total: usize = dims.iter().product();
    if !a.is_square() || a.rows() != total {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but site dimensions {:?} multiply to {}",
            a.rows(),
            a.cols(),
            dims,
            total
        )));
    }
    Ok(total)
}

/// Traces out every site not in `keep`. `keep` may be any subset; the output
/// keeps the retained sites in their original order.
pub fn partial_trace(a: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total = check_dims(a, dims)?;
    let n = dims.len();
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&s| s >= n) {
        return Err(Error::DimensionMismatch(format!("keep set {keep:?} exceeds {n} sites")));
    }
    let traced: Vec<usize> = (0..n).filter(|s| !kept.contains(s)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&s| dims[s]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&s| dims[s]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();

    // strides of each site in the full index
    let mut strides = alloc::vec![0usize; n];
    let mut acc = 1;
    for s in (0..n).rev() {
        strides[s] = acc;
        acc *= dims[s];
    }
    debug_assert_eq!(acc, total);
    let offsets = |sites: &[usize], sdims: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|idx| {
                let mut rem = idx;
                let mut off = 0;
                for k in (0..sites.len()).rev() {
                    off += (rem % sdims[k]) * strides[sites[k]];
                    rem /= sdims[k];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept, &kept_dims, kept_total);
    let traced_off = offsets(&traced, &traced_dims, traced_total);

    let mut out = ComplexMatrix::zeros(kept_total, kept_total);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            let mut sum = ZERO;
            for &t in &traced_off {
                sum += a[(ro + t, co + t)];
            }
            out[(r, c)] = sum;
        }
    }
    Ok(out)
}

/// `I_left (x) op (x) I_right` where `support` is a sorted contiguous run of
/// sites.
pub fn embed_operator(op: &ComplexMatrix, dims: &[usize], support: &[usize]) -> Result<ComplexMatrix> {
    if support.is_empty() || support.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::NonContiguousSupport(support.to_vec()));
    }
    let last = *support.last().unwrap_or(&0);
    if last >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "support {support:?} exceeds {} sites",
            dims.len()
        )));
    }
    let block: usize = support.iter().map(|&s| dims[s]).product();
    if !op.is_square() || op.rows() != block {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but support dimension is {block}",
            op.rows(),
            op.cols()
        )));
    }
    let left: usize = dims[..support[0]].iter().product();
    let right: usize = dims[last + 1..].iter().product();
    Ok(ComplexMatrix::identity(left)
        .kron(op)
        .kron(&ComplexMatrix::identity(right)))
}

/// Completes an orthonormal set to a basis of `C^dim`.
///
/// Candidates are the computational basis vectors in index order; a candidate
/// whose residual after projection is below `1e-8` is skipped. Seeded random
/// vectors are used only if the canonical candidates run out.
pub fn gram_schmidt_extend(partial: &[ComplexVector], dim: usize, seed: u64) -> Result<Vec<ComplexVector>> {
    if partial.len() > dim {
        return Err(Error::DimensionMismatch(format!(
            "{} vectors cannot be orthonormal in dimension {dim}",
            partial.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (i, a) in partial.iter().enumerate() {
        if a.len() != dim {
            return Err(Error::DimensionMismatch(format!("vector of length {} in dimension {dim}", a.len())));
        }
        for b in &partial[i..] {
            let expected = if core::ptr::eq(a, b) { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - real(expected)).norm());
        }
    }
    if worst > 1e-10 {
        return Err(Error::NotOrthonormal(worst));
    }

    let mut basis: Vec<ComplexVector> = partial.to_vec();
    let mut candidate = 0;
    let mut rng = rng::seeded(seed);
    while basis.len() < dim {
        let v = if candidate < dim {
            candidate += 1;
            ComplexVector::basis(dim, candidate - 1)
        } else {
            rng::random_unit_vector(&mut rng, dim)
        };
        if let Some(u) = orthogonalize(v, &basis) {
            basis.push(u);
        }
    }
    Ok(basis)
}

fn orthogonalize(mut v: ComplexVector, basis: &[ComplexVector]) -> Option<ComplexVector> {
    for _ in 0..2 {
        for b in basis {
            let overlap: C64 = b.inner(&v);
            v.axpy(-overlap, b);
        }
    }
    let norm = v.norm();
    if norm < 1e-8 {
        return None;
    }
    let mut u = v.scaled(real(1.0 / norm));
    // a third pass cleans up candidates that were nearly dependent
    if norm < 1e-3 {
        for b in basis {
            let overlap: C64 = b.inner(&u);
            u.axpy(-overlap, b);
        }
        u = u.normalized()?;
    }
    Some(u)
}

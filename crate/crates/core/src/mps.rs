//! Matrix product states.
//!
//! Site `k` holds `d` matrices `A[k][i]` of shape `D_{k-1} x D_k`; the
//! amplitude of basis state `(i_0, ..., i_{n-1})` is
//! `Tr(A[0][i_0] A[1][i_1] ... A[n-1][i_{n-1}])`. Site 0 is the most
//! significant digit of the dense index.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{checked_pow, partial_trace, real, svd, ComplexMatrix, ComplexVector, C64, ONE, ZERO};
use crate::rng;

/// Largest dense vector the crate will materialize.
pub const MAX_AMPLITUDES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidSpec(format!("unknown boundary `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Random,
    Ghz,
    Product,
    WState,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::Random => "random",
            StateKind::Ghz => "ghz",
            StateKind::Product => "product",
            StateKind::WState => "w-state",
        })
    }
}

impl FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StateKind::Random),
            "ghz" => Ok(StateKind::Ghz),
            "product" => Ok(StateKind::Product),
            "w-state" | "w" => Ok(StateKind::WState),
            other => Err(Error::InvalidSpec(format!("unknown state kind `{other}`"))),
        }
    }
}

/// Instance description for the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpec {
    pub n: usize,
    pub d: usize,
    pub bond: usize,
    pub boundary: Boundary,
    pub seed: u64,
    pub kind: StateKind,
}

impl StateSpec {
    pub fn random(n: usize, d: usize, bond: usize, seed: u64) -> Self {
        StateSpec { n, d, bond, boundary: Boundary::Open, seed, kind: StateKind::Random }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("n = {} but at least 2 sites are needed", self.n)));
        }
        if self.d < 2 {
            return Err(Error::InvalidSpec(format!("local dimension {} < 2", self.d)));
        }
        if self.bond == 0 {
            return Err(Error::InvalidSpec(String::from("bond dimension must be at least 1")));
        }
        match self.kind {
            StateKind::Ghz | StateKind::WState if self.bond < 2 => Err(Error::InvalidSpec(format!(
                "{} needs bond dimension 2, got {}",
                self.kind, self.bond
            ))),
            StateKind::Product if self.bond != 1 => Err(Error::InvalidSpec(format!(
                "product states have bond dimension 1, got {}",
                self.bond
            ))),
            _ => Ok(()),
        }
    }
}

/// The `d` matrices of one site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    right: usize,
    mats: Vec<ComplexMatrix>,
}

impl SiteTensor {
    pub fn new(mats: Vec<ComplexMatrix>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidSpec(String::from("site tensor without physical index")))?;
        let (left, right) = (first.rows(), first.cols());
        if left == 0 || right == 0 {
            return Err(Error::InvalidSpec(String::from("zero bond dimension")));
        }
        if mats.iter().any(|m| m.rows() != left || m.cols() != right) {
            return Err(Error::InvalidSpec(String::from("site matrices differ in shape")));
        }
        if mats.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec(String::from("non-finite tensor entry")));
        }
        Ok(SiteTensor { left, right, mats })
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn physical(&self) -> usize {
        self.mats.len()
    }

    pub fn matrix(&self, i: usize) -> &ComplexMatrix {
        &self.mats[i]
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.mats
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    d: usize,
    boundary: Boundary,
    sites: Vec<SiteTensor>,
}

impl MatrixProductState {
    pub fn from_sites(d: usize, boundary: Boundary, sites: Vec<SiteTensor>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSpec(format!("local dimension {d} < 2")));
        }
        if sites.is_empty() {
            return Err(Error::InvalidSpec(String::from("no sites")));
        }
        for (k, s) in sites.iter().enumerate() {
            if s.physical() != d {
                return Err(Error::InvalidSpec(format!("site {k} has {} matrices, expected {d}", s.physical())));
            }
        }
        for k in 1..sites.len() {
            if sites[k - 1].right != sites[k].left {
                return Err(Error::InvalidSpec(format!(
                    "bond mismatch between sites {} and {k}: {} vs {}",
                    k - 1,
                    sites[k - 1].right,
                    sites[k].left
                )));
            }
        }
        let outer_left = sites[0].left;
        let outer_right = sites[sites.len() - 1].right;
        match boundary {
            Boundary::Open if outer_left != 1 || outer_right != 1 => Err(Error::InvalidSpec(format!(
                "open boundary needs outer bonds 1, got {outer_left} and {outer_right}"
            ))),
            Boundary::Periodic if outer_left != outer_right => Err(Error::InvalidSpec(format!(
                "periodic boundary needs matching outer bonds, got {outer_left} and {outer_right}"
            ))),
            _ => Ok(MatrixProductState { d, boundary, sites }),
        }
    }

    /// `|0...0>` as a bond-1 chain.
    pub fn zero_state(n: usize, d: usize) -> Result<Self> {
        let zero = ComplexVector::basis(d, 0);
        Self::product(&vec![zero; n])
    }

    pub fn product(locals: &[ComplexVector]) -> Result<Self> {
        let d = locals.first().map_or(0, ComplexVector::len);
        let sites = locals
            .iter()
            .map(|v| {
                if v.len() != d {
                    return Err(Error::InvalidSpec(String::from("local vectors differ in dimension")));
                }
                SiteTensor::new(v.iter().map(|&a| ComplexMatrix::from_vec(1, 1, vec![a])).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sites(d, Boundary::Open, sites)
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    /// `D_0, D_1, ..., D_n`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.n() + 1);
        dims.push(self.sites[0].left);
        dims.extend(self.sites.iter().map(|s| s.right));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn parameter_count(&self) -> usize {
        self.sites.iter().map(|s| s.left * s.right * self.d).sum()
    }

    pub fn dense_dim(&self) -> Option<usize> {
        checked_pow(self.d, self.n())
    }

    /// `<psi|psi>` by transfer-matrix contraction; works at any `n`.
    pub fn norm_sqr(&self) -> f64 {
        let d0 = self.sites[0].left;
        // env[(a, a'), (b, b')] flattened with leading outer pair
        let mut env = ComplexMatrix::identity(d0 * d0);
        for site in &self.sites {
            let (l, r) = (site.left, site.right);
            let mut next = ComplexMatrix::zeros(d0 * d0, r * r);
            for row in 0..d0 * d0 {
                for a in 0..l {
                    for a2 in 0..l {
                        let e = env[(row, a * l + a2)];
                        if e == ZERO {
                            continue;
                        }
                        for m in &site.mats {
                            for b in 0..r {
                                let x = e * m[(a, b)];
                                if x == ZERO {
                                    continue;
                                }
                                for b2 in 0..r {
                                    next[(row, b * r + b2)] += x * m[(a2, b2)].conj();
                                }
                            }
                        }
                    }
                }
            }
            env = next;
        }
        let mut total = ZERO;
        for a in 0..d0 {
            for a2 in 0..d0 {
                total += env[(a * d0 + a2, a * d0 + a2)];
            }
        }
        total.re
    }

    /// Rescales so that the expanded vector has unit norm.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = libm::sqrt(self.norm_sqr());
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidSpec(String::from("state has zero norm")));
        }
        // spread the factor evenly to keep every site well scaled
        let factor = real(libm::pow(norm, -1.0 / self.n() as f64));
        for site in &mut self.sites {
            for m in &mut site.mats {
                m.scale_mut(factor);
            }
        }
        Ok(())
    }

    /// Dense amplitudes `c_{i_0 ... i_{n-1}}`.
    pub fn expand(&self) -> Result<ComplexVector> {
        let dim = self
            .dense_dim()
            .filter(|&x| x <= MAX_AMPLITUDES)
            .ok_or_else(|| Error::TooLarge(format!("{}^{} amplitudes exceed {MAX_AMPLITUDES}", self.d, self.n())))?;
        let d0 = self.sites[0].left;
        // rows are (outer index, prefix) with the outer index most significant
        let mut rows = d0;
        let mut cols = d0;
        let mut cur: Vec<C64> = ComplexMatrix::identity(d0).into_vec();
        for site in &self.sites {
            let r = site.right;
            let mut next = vec![ZERO; rows * self.d * r];
            for row in 0..rows {
                let src = &cur[row * cols..(row + 1) * cols];
                for (i, m) in site.mats.iter().enumerate() {
                    let dst = &mut next[(row * self.d + i) * r..(row * self.d + i + 1) * r];
                    for (a, &x) in src.iter().enumerate() {
                        if x == ZERO {
                            continue;
                        }
                        for (b, slot) in dst.iter_mut().enumerate() {
                            *slot += x * m[(a, b)];
                        }
                    }
                }
            }
            rows *= self.d;
            cols = r;
            cur = next;
        }
        let mut out = vec![ZERO; dim];
        for a in 0..d0 {
            for (idx, slot) in out.iter_mut().enumerate() {
                *slot += cur[(a * dim + idx) * cols + a];
            }
        }
        Ok(ComplexVector::from_vec(out))
    }

    /// Pads an open chain into a periodic one with uniform bond `max_bond`.
    pub fn to_periodic(&self) -> Self {
        if self.boundary == Boundary::Periodic {
            return self.clone();
        }
        let big = self.max_bond();
        let sites = self
            .sites
            .iter()
            .map(|s| SiteTensor {
                left: big,
                right: big,
                mats: s
                    .mats
                    .iter()
                    .map(|m| ComplexMatrix::from_fn(big, big, |a, b| {
                        if a < m.rows() && b < m.cols() {
                            m[(a, b)]
                        } else {
                            ZERO
                        }
                    }))
                    .collect(),
            })
            .collect();
        MatrixProductState { d: self.d, boundary: Boundary::Periodic, sites }
    }
}

/// Generates the instance described by `spec`.
pub fn random_mps(spec: &StateSpec) -> Result<MatrixProductState> {
    spec.validate()?;
    let open = match spec.kind {
        StateKind::Random => {
            return match spec.boundary {
                Boundary::Open => gaussian_open(spec),
                Boundary::Periodic => gaussian_periodic(spec),
            }
        }
        StateKind::Ghz => ghz(spec.n, spec.d)?,
        StateKind::WState => w_state(spec.n, spec.d)?,
        StateKind::Product => {
            let mut r = rng::seeded(spec.seed);
            let locals: Vec<ComplexVector> = (0..spec.n).map(|_| rng::random_unit_vector(&mut r, spec.d)).collect();
            MatrixProductState::product(&locals)?
        }
    };
    Ok(match spec.boundary {
        Boundary::Open => open,
        Boundary::Periodic => open.to_periodic(),
    })
}

/// Open-boundary bond dimensions `min(D, d^k, d^{n-k})`.
pub fn open_bond_dims(n: usize, d: usize, bond: usize) -> Vec<usize> {
    (0..=n)
        .map(|k| {
            let left = checked_pow(d, k).unwrap_or(usize::MAX);
            let right = checked_pow(d, n - k).unwrap_or(usize::MAX);
            bond.min(left).min(right)
        })
        .collect()
}

fn gaussian_site(r: &mut rng::SeededRng, d: usize, left: usize, right: usize) -> SiteTensor {
    let mats = (0..d)
        .map(|_| ComplexMatrix::from_fn(left, right, |_, _| rng::complex_normal(r)))
        .collect();
    SiteTensor { left, right, mats }
}

fn gaussian_open(spec: &StateSpec) -> Result<MatrixProductState> {
    let dims = open_bond_dims(spec.n, spec.d, spec.bond);
    let mut r = rng::seeded(spec.seed);
    let sites = (0..spec.n).map(|k| gaussian_site(&mut r, spec.d, dims[k], dims[k + 1])).collect();
    let mut mps = MatrixProductState::from_sites(spec.d, Boundary::Open, sites)?;
    mps.normalize()?;
    Ok(mps)
}

fn gaussian_periodic(spec: &StateSpec) -> Result<MatrixProductState> {
    let mut r = rng::seeded(spec.seed);
    let sites = (0..spec.n).map(|_| gaussian_site(&mut r, spec.d, spec.bond, spec.bond)).collect();
    let mut mps = MatrixProductState::from_sites(spec.d, Boundary::Periodic, sites)?;
    mps.normalize()?;
    Ok(mps)
}

fn diag_pair(first: bool) -> ComplexMatrix {
    if first {
        ComplexMatrix::from_diagonal(&[1.0, 0.0])
    } else {
        ComplexMatrix::from_diagonal(&[0.0, 1.0])
    }
}

/// `(|0...0> + |1...1>)/sqrt 2` on the first two local levels.
pub fn ghz(n: usize, d: usize) -> Result<MatrixProductState> {
    let amp = core::f64::consts::FRAC_1_SQRT_2;
    let sites = (0..n)
        .map(|k| {
            let mats = (0..d)
                .map(|i| {
                    let core = match i {
                        0 => diag_pair(true),
                        1 => diag_pair(false),
                        _ => ComplexMatrix::zeros(2, 2),
                    };
                    if k == 0 {
                        // row vector picking the diagonal branch, carrying the amplitude
                        ComplexMatrix::from_fn(1, 2, |_, b| core[(b, b)] * amp)
                    } else if k == n - 1 {
                        ComplexMatrix::from_fn(2, 1, |a, _| core[(a, a)])
                    } else {
                        core
                    }
                })
                .collect();
            SiteTensor::new(mats)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixProductState::from_sites(d, Boundary::Open, sites)
}

/// `(|10...0> + |010...0> + ... + |0...01>)/sqrt n`.
pub fn w_state(n: usize, d: usize) -> Result<MatrixProductState> {
    let amp = 1.0 / libm::sqrt(n as f64);
    let identity = ComplexMatrix::identity(2);
    let mut raise = ComplexMatrix::zeros(2, 2);
    raise[(0, 1)] = ONE;
    let sites = (0..n)
        .map(|k| {
            let mats = (0..d)
                .map(|i| {
                    let core = match i {
                        0 => identity.clone(),
                        1 => raise.clone(),
                        _ => ComplexMatrix::zeros(2, 2),
                    };
                    if k == 0 {
                        ComplexMatrix::from_fn(1, 2, |_, b| core[(0, b)] * amp)
                    } else if k == n - 1 {
                        ComplexMatrix::from_fn(2, 1, |a, _| core[(a, 1)])
                    } else {
                        core
                    }
                })
                .collect();
            SiteTensor::new(mats)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixProductState::from_sites(d, Boundary::Open, sites)
}

/// Stored tensor entries for a chain built by the generators above.
pub fn mps_parameter_count(n: usize, d: usize, bond: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Periodic => n * d * bond * bond,
        Boundary::Open => {
            let dims = open_bond_dims(n, d, bond);
            (0..n).map(|k| d * dims[k] * dims[k + 1]).sum()
        }
    }
}

/// A register state: a (possibly sub-normalized) vector or density matrix.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a ComplexVector),
    Mixed(&'a ComplexMatrix),
}

fn check_block(dims: &[usize], block: &[usize]) -> Result<()> {
    if block.is_empty() || block.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::NonContiguousSupport(block.to_vec()));
    }
    if block[block.len() - 1] >= dims.len() {
        return Err(Error::BlockOutOfRange { block: block.to_vec(), sites: dims.len() });
    }
    Ok(())
}

/// Reduced state on a contiguous block of sites.
pub fn block_rdm(state: StateRef<'_>, dims: &[usize], block: &[usize]) -> Result<ComplexMatrix> {
    check_block(dims, block)?;
    match state {
        StateRef::Mixed(rho) => partial_trace(rho, dims, block),
        StateRef::Pure(psi) => {
            let total: usize = dims.iter().product();
            if psi.len() != total {
                return Err(Error::DimensionMismatch(format!(
                    "vector of length {} on sites {dims:?}",
                    psi.len()
                )));
            }
            let left: usize = dims[..block[0]].iter().product();
            let mid: usize = block.iter().map(|&s| dims[s]).product();
            let right = total / (left * mid);
            let v = psi.as_slice();
            let mut out = ComplexMatrix::zeros(mid, mid);
            for l in 0..left {
                let base = l * mid * right;
                for b in 0..mid {
                    for b2 in b..mid {
                        let mut acc = ZERO;
                        let x = &v[base + b * right..base + (b + 1) * right];
                        let y = &v[base + b2 * right..base + (b2 + 1) * right];
                        for (p, q) in x.iter().zip(y) {
                            acc += p * q.conj();
                        }
                        out[(b, b2)] += acc;
                    }
                }
            }
            for b in 0..mid {
                out[(b, b)] = real(out[(b, b)].re);
                for b2 in b + 1..mid {
                    out[(b2, b)] = out[(b, b2)].conj();
                }
            }
            Ok(out)
        }
    }
}

/// Schmidt rank of a pure state across the cut between sites `cut - 1` and
/// `cut`: the number of reduced-state eigenvalues (squared singular values)
/// above `tol`.
pub fn schmidt_rank(psi: &ComplexVector, dims: &[usize], cut: usize, tol: f64) -> Result<usize> {
    let n = dims.len();
    if cut == 0 || cut >= n {
        return Err(Error::BadCut { cut, n });
    }
    let left: usize = dims[..cut].iter().product();
    let right: usize = dims[cut..].iter().product();
    if psi.len() != left * right {
        return Err(Error::DimensionMismatch(format!("vector of length {} on sites {dims:?}", psi.len())));
    }
    let m = ComplexMatrix::from_vec(left, right, psi.as_slice().to_vec());
    Ok(svd(&m)?.s.iter().filter(|&&s| s * s > tol).count())
}

/// Schmidt ranks across every cut `1..n` of an expanded chain.
pub fn cut_rank_profile(mps: &MatrixProductState, tol: f64) -> Result<Vec<usize>> {
    let psi = mps.expand()?;
    let dims = vec![mps.d(); mps.n()];
    (1..mps.n()).map(|cut| schmidt_rank(&psi, &dims, cut, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, to_digits};

    fn brute_amplitude(mps: &MatrixProductState, idx: usize) -> C64 {
        let digits = to_digits(idx, mps.d(), mps.n());
        let mut acc = mps.sites()[0].matrix(digits[0]).clone();
        for (k, &i) in digits.iter().enumerate().skip(1) {
            acc = acc.matmul(mps.sites()[k].matrix(i));
        }
        acc.trace()
    }

    #[test]
    fn bond_one_is_product() {
        let mps = random_mps(&StateSpec::random(4, 2, 1, 3)).unwrap();
        assert_eq!(mps.max_bond(), 1);
        assert_eq!(cut_rank_profile(&mps, 1e-10).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn ghz_amplitudes_and_ranks() {
        let spec = StateSpec { kind: StateKind::Ghz, ..StateSpec::random(4, 2, 2, 0) };
        let mps = random_mps(&spec).unwrap();
        let psi = mps.expand().unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        for (idx, a) in psi.iter().enumerate() {
            let expected = if idx == 0 || idx == 15 { s } else { 0.0 };
            assert!((a - real(expected)).norm() < 1e-15);
        }
        assert_eq!(cut_rank_profile(&mps, 1e-10).unwrap(), vec![2, 2, 2]);
        let mid = block_rdm(StateRef::Pure(&psi), &[2, 2, 2, 2], &[1]).unwrap();
        assert!(mid.max_abs_diff(&ComplexMatrix::from_diagonal(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn w_state_amplitudes() {
        let mps = w_state(5, 2).unwrap();
        let psi = mps.expand().unwrap();
        let amp = 1.0 / libm::sqrt(5.0);
        for (idx, a) in psi.iter().enumerate() {
            let expected = if idx.count_ones() == 1 { amp } else { 0.0 };
            assert!((a - real(expected)).norm() < 1e-15, "index {idx}");
        }
    }

    #[test]
    fn zero_state_expands_to_first_basis_vector() {
        let psi = MatrixProductState::zero_state(5, 3).unwrap().expand().unwrap();
        assert_eq!(psi, ComplexVector::basis(243, 0));
    }

    #[test]
    fn expansion_matches_per_index_products() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let spec = StateSpec { boundary, ..StateSpec::random(6, 2, 2, 17) };
            let mps = random_mps(&spec).unwrap();
            let psi = mps.expand().unwrap();
            for idx in 0..psi.len() {
                let oracle = brute_amplitude(&mps, idx);
                assert!((psi[idx] - oracle).norm() <= 1e-12 * oracle.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn random_states_are_normalized() {
        let mps = random_mps(&StateSpec::random(8, 2, 3, 7)).unwrap();
        assert!((mps.expand().unwrap().norm() - 1.0).abs() < 1e-10);
        assert_eq!(mps.bond_dims(), vec![1, 2, 3, 3, 3, 3, 3, 2, 1]);
    }

    #[test]
    fn transfer_norm_matches_expansion() {
        let spec = StateSpec { boundary: Boundary::Periodic, ..StateSpec::random(5, 3, 2, 2) };
        let mut mps = random_mps(&spec).unwrap();
        for site in &mut mps.sites {
            for m in &mut site.mats {
                m.scale_mut(real(1.3));
            }
        }
        let dense = mps.expand().unwrap().norm_sqr();
        assert!((mps.norm_sqr() - dense).abs() < 1e-10 * dense);
    }

    #[test]
    fn periodic_padding_preserves_amplitudes() {
        let open = w_state(4, 2).unwrap();
        let periodic = open.to_periodic();
        assert_eq!(periodic.boundary(), Boundary::Periodic);
        assert!(periodic.expand().unwrap().max_abs_diff(&open.expand().unwrap()) < 1e-15);
    }

    #[test]
    fn random_cuts_respect_bond() {
        let mps = random_mps(&StateSpec::random(8, 2, 3, 5)).unwrap();
        let profile = cut_rank_profile(&mps, 1e-10).unwrap();
        assert!(profile.iter().all(|&r| r <= 3));
        // Gaussian tensors saturate the bond
        assert_eq!(profile, vec![2, 3, 3, 3, 3, 3, 2]);
    }

    #[test]
    fn schmidt_rank_matches_prefix_rdm_rank() {
        let mps = random_mps(&StateSpec::random(6, 2, 2, 9)).unwrap();
        let psi = mps.expand().unwrap();
        let dims = [2; 6];
        for cut in 1..6 {
            let prefix: Vec<usize> = (0..cut).collect();
            let rdm = block_rdm(StateRef::Pure(&psi), &dims, &prefix).unwrap();
            assert_eq!(schmidt_rank(&psi, &dims, cut, 1e-10).unwrap(), numerical_rank(&rdm, 1e-10).unwrap());
        }
        assert!(matches!(schmidt_rank(&psi, &dims, 0, 1e-10), Err(Error::BadCut { .. })));
        assert!(matches!(schmidt_rank(&psi, &dims, 6, 1e-10), Err(Error::BadCut { .. })));
    }

    #[test]
    fn pure_block_rdm_matches_partial_trace() {
        let mps = random_mps(&StateSpec::random(5, 2, 2, 4)).unwrap();
        let psi = mps.expand().unwrap();
        let dims = [2; 5];
        let rho = psi.projector();
        for block in [vec![0, 1], vec![1, 2, 3], vec![4], vec![0, 1, 2, 3, 4]] {
            let fast = block_rdm(StateRef::Pure(&psi), &dims, &block).unwrap();
            let slow = block_rdm(StateRef::Mixed(&rho), &dims, &block).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-14);
        }
        let full = block_rdm(StateRef::Pure(&psi), &dims, &[0, 1, 2, 3, 4]).unwrap();
        assert!(full.max_abs_diff(&rho) < 1e-15);
        assert!(matches!(
            block_rdm(StateRef::Pure(&psi), &dims, &[0, 2]),
            Err(Error::NonContiguousSupport(_))
        ));
    }

    #[test]
    fn middle_block_rank_bounded_by_bond_squared() {
        let mps = random_mps(&StateSpec::random(8, 2, 2, 12)).unwrap();
        let psi = mps.expand().unwrap();
        let rdm = block_rdm(StateRef::Pure(&psi), &[2; 8], &[3, 4, 5]).unwrap();
        assert_eq!(numerical_rank(&rdm, 1e-10).unwrap(), 4);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(mps_parameter_count(2, 2, 1, Boundary::Open), 4);
        assert_eq!(mps_parameter_count(3, 2, 2, Boundary::Periodic), 24);
        assert_eq!(
            2 * mps_parameter_count(5, 3, 2, Boundary::Periodic),
            mps_parameter_count(10, 3, 2, Boundary::Periodic)
        );
        let mps = random_mps(&StateSpec::random(7, 2, 3, 1)).unwrap();
        assert_eq!(mps.parameter_count(), mps_parameter_count(7, 2, 3, Boundary::Open));
    }

    #[test]
    fn invalid_specs() {
        assert!(random_mps(&StateSpec::random(1, 2, 2, 0)).is_err());
        assert!(random_mps(&StateSpec::random(4, 1, 2, 0)).is_err());
        assert!(random_mps(&StateSpec::random(4, 2, 0, 0)).is_err());
        let spec = StateSpec { kind: StateKind::Ghz, ..StateSpec::random(4, 2, 1, 0) };
        assert!(matches!(random_mps(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn expansion_size_limit() {
        let mps = MatrixProductState::zero_state(17, 2).unwrap();
        assert!(matches!(mps.expand(), Err(Error::TooLarge(_))));
    }

    #[test]
    fn same_seed_same_tensors() {
        let a = random_mps(&StateSpec::random(6, 3, 2, 99)).unwrap();
        let b = random_mps(&StateSpec::random(6, 3, 2, 99)).unwrap();
        let c = random_mps(&StateSpec::random(6, 3, 2, 98)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

//! Simulated block tomography and copy budgets.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, real, trace_distance, ComplexMatrix, ComplexVector, C64, ZERO};
use crate::mps::{block_rdm, StateRef};
use crate::rng::{self, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleMode {
    Exact,
    /// `sigma_hat = sigma + eta * Delta / ||Delta||_1` with traceless Hermitian
    /// `Delta`. With `psd` set the estimate is clipped to be positive and
    /// pulled back toward `sigma` so that the distance stays at most `eta`.
    BoundedNoise { eta: f64, seed: u64, psd: bool },
    /// Linear-inversion tomography from `copies` simulated measurements.
    FiniteSample { copies: u64, seed: u64 },
}

impl OracleMode {
    pub fn noise(eta: f64, seed: u64) -> Self {
        OracleMode::BoundedNoise { eta, seed, psd: false }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OracleMode::Exact => "exact",
            OracleMode::BoundedNoise { .. } => "noise",
            OracleMode::FiniteSample { .. } => "sample",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            OracleMode::Exact => None,
            OracleMode::BoundedNoise { seed, .. } | OracleMode::FiniteSample { seed, .. } => Some(seed),
        }
    }

    /// Same mode with the seed replaced by a stream derived from `labels`.
    pub fn derived(&self, labels: &[u64]) -> Self {
        match *self {
            OracleMode::Exact => OracleMode::Exact,
            OracleMode::BoundedNoise { eta, seed, psd } => OracleMode::BoundedNoise {
                eta,
                seed: rng::derive_seed(seed, labels),
                psd,
            },
            OracleMode::FiniteSample { copies, seed } => OracleMode::FiniteSample {
                copies,
                seed: rng::derive_seed(seed, labels),
            },
        }
    }

    /// Same mode with the noise level replaced (no-op for other modes).
    pub fn with_eta(&self, eta: f64) -> Self {
        match *self {
            OracleMode::BoundedNoise { seed, psd, .. } => OracleMode::BoundedNoise { eta, seed, psd },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OracleMode::BoundedNoise { eta, .. } if !(eta > 0.0 && eta < 1.0) => {
                Err(Error::BadParameter(format!("noise level {eta} outside (0, 1)")))
            }
            OracleMode::FiniteSample { copies: 0, .. } => Err(Error::BadParameter(String::from("zero copies"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for OracleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleMode::Exact => f.write_str("exact"),
            OracleMode::BoundedNoise { eta, seed, psd } => write!(f, "noise(eta={eta:e}, seed={seed}, psd={psd})"),
            OracleMode::FiniteSample { copies, seed } => write!(f, "sample(copies={copies}, seed={seed})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TomographyOutcome {
    pub estimate: ComplexMatrix,
    /// `Tr` of the true block state.
    pub success_mass: f64,
    /// Copies drawn by the simulation itself (zero outside finite-sample mode).
    pub copies_used: u64,
    pub mode: OracleMode,
}

/// Estimates the reduced state of `state` on a contiguous `block`.
pub fn estimate_block(
    state: StateRef<'_>,
    dims: &[usize],
    block: &[usize],
    mode: &OracleMode,
) -> Result<TomographyOutcome> {
    if block.iter().any(|&s| s >= dims.len()) {
        return Err(Error::BlockOutOfRange { block: block.to_vec(), sites: dims.len() });
    }
    mode.validate()?;
    let sigma = block_rdm(state, dims, block)?;
    estimate_from_block_state(&sigma, &block.iter().map(|&s| dims[s]).collect::<Vec<_>>(), mode)
}

/// Oracle applied to an already-reduced block state.
pub fn estimate_from_block_state(sigma: &ComplexMatrix, dims: &[usize], mode: &OracleMode) -> Result<TomographyOutcome> {
    let mass = sigma.trace().re;
    let (estimate, copies_used) = match *mode {
        OracleMode::Exact => (sigma.clone(), 0),
        OracleMode::BoundedNoise { eta, seed, psd } => (bounded_noise(sigma, eta, seed, psd)?, 0),
        OracleMode::FiniteSample { copies, seed } => (finite_sample(sigma, dims, copies, seed)?, copies),
    };
    Ok(TomographyOutcome { estimate, success_mass: mass, copies_used, mode: *mode })
}

fn bounded_noise(sigma: &ComplexMatrix, eta: f64, seed: u64, psd: bool) -> Result<ComplexMatrix> {
    let dim = sigma.rows();
    let mut r = rng::seeded(seed);
    if dim == 1 {
        // no traceless direction exists; the only trace-preserving estimate is exact
        return Ok(sigma.clone());
    }
    let mut delta = rng::random_hermitian(&mut r, dim);
    let shift = delta.trace() / (dim as f64);
    for k in 0..dim {
        delta[(k, k)] -= shift;
    }
    let size = crate::linalg::trace_norm(&delta)?;
    let mut estimate = sigma + &delta.scaled(real(eta / size));
    if psd {
        estimate = clip_toward(sigma, &estimate, eta)?;
    }
    let err = trace_distance(&estimate, sigma)?;
    if err > eta * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::OracleFailure(format!("noise {err:e} exceeds bound {eta:e}")));
    }
    Ok(estimate.hermitian_part())
}

/// Positive part of `estimate` with the trace of `sigma`, mixed back toward
/// `sigma` if it drifted more than `eta` away.
fn clip_toward(sigma: &ComplexMatrix, estimate: &ComplexMatrix, eta: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(estimate)?;
    let dim = sigma.rows();
    let mut clipped = ComplexMatrix::zeros(dim, dim);
    for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
        if *lambda > 0.0 {
            clipped = &clipped + &v.projector().scaled(real(*lambda));
        }
    }
    let tr = clipped.trace().re;
    let target = sigma.trace().re;
    if tr > 0.0 {
        clipped.scale_mut(real(target / tr));
    }
    let dist = trace_distance(&clipped, sigma)?;
    if dist <= eta {
        return Ok(clipped);
    }
    let w = eta / dist;
    Ok(&sigma.scaled(real(1.0 - w)) + &clipped.scaled(real(w)))
}

/// Post-selected copy count: a `Binomial(m, mu)` draw.
pub fn simulate_postselect(m: u64, mu: f64, seed: u64) -> u64 {
    let mut r = rng::seeded(seed);
    binomial(&mut r, m, mu)
}

fn binomial(r: &mut SeededRng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    match Binomial::new(n, p) {
        Ok(dist) => dist.sample(r),
        Err(_) => 0,
    }
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial(r: &mut SeededRng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == probs.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).min(1.0) } else { 0.0 };
        let c = binomial(r, left, q);
        counts[k] = c;
        left -= c;
        mass -= p;
    }
    counts
}

/// The `d + 1` measurement bases of one qudit, each as a unitary whose
/// columns are the basis vectors.
///
/// Prime `d` uses a complete set of mutually unbiased bases; otherwise the
/// computational basis plus `d` seeded random bases.
pub fn measurement_bases(d: usize, seed: u64) -> Vec<ComplexMatrix> {
    let mut bases = vec![ComplexMatrix::identity(d)];
    let s = 1.0 / libm::sqrt(d as f64);
    if d == 2 {
        let h = ComplexMatrix::from_vec(2, 2, vec![real(s), real(s), real(s), real(-s)]);
        let i = C64::new(0.0, s);
        let y = ComplexMatrix::from_vec(2, 2, vec![real(s), real(s), i, -i]);
        bases.push(h);
        bases.push(y);
    } else if is_prime(d) {
        let omega = |k: usize| {
            let angle = 2.0 * core::f64::consts::PI * (k % d) as f64 / d as f64;
            C64::new(libm::cos(angle) * s, libm::sin(angle) * s)
        };
        for a in 0..d {
            // column b, row k: omega^{a k^2 + b k}
            bases.push(ComplexMatrix::from_fn(d, d, |k, b| omega(a * k * k + b * k)));
        }
    } else {
        let mut r = rng::seeded(seed);
        for _ in 0..d {
            bases.push(rng::random_unitary(&mut r, d));
        }
    }
    bases
}

fn is_prime(d: usize) -> bool {
    d >= 2 && (2..d).take_while(|k| k * k <= d).all(|k| !d.is_multiple_of(k))
}

/// Canonical dual operators for the single-qudit effects `|b_{a,o}><b_{a,o}|`,
/// indexed by `a * d + o`.
pub fn dual_frame(bases: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let d = bases[0].rows();
    let projectors: Vec<ComplexMatrix> = bases
        .iter()
        .flat_map(|u| (0..u.cols()).map(move |o| u.column(o).projector()))
        .collect();
    let vecs: Vec<ComplexVector> = projectors
        .iter()
        .map(|p| ComplexVector::from_vec(p.as_slice().to_vec()))
        .collect();
    // frame superoperator S = sum |vec P><vec P|
    let mut frame = ComplexMatrix::zeros(d * d, d * d);
    for v in &vecs {
        frame = &frame + &ComplexMatrix::outer(v, v);
    }
    let eig = hermitian_eig(&frame)?;
    let floor = 1e-10 * eig.max_value();
    if eig.min_value() <= floor {
        return Err(Error::OracleFailure(String::from("measurement set is not informationally complete")));
    }
    let mut inverse = ComplexMatrix::zeros(d * d, d * d);
    for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
        inverse = &inverse + &v.projector().scaled(real(1.0 / lambda));
    }
    Ok(vecs
        .iter()
        .map(|v| ComplexMatrix::from_vec(d, d, inverse.mul_vec(v).into_vec()))
        .collect())
}

fn finite_sample(sigma: &ComplexMatrix, dims: &[usize], copies: u64, seed: u64) -> Result<ComplexMatrix> {
    let d = dims[0];
    if dims.iter().any(|&x| x != d) {
        return Err(Error::BadParameter(String::from("finite-sample tomography needs a uniform register")));
    }
    let k = dims.len();
    let dim = sigma.rows();
    let mass = sigma.trace().re.clamp(0.0, 1.0);
    let mut r = rng::seeded(seed);
    let kept = binomial(&mut r, copies, mass);
    if kept == 0 || mass <= 0.0 {
        return Ok(ComplexMatrix::zeros(dim, dim));
    }
    let rho = sigma.scaled(real(1.0 / sigma.trace().re));

    let bases = measurement_bases(d, rng::derive_seed(seed, &[0xba5e]));
    let duals = dual_frame(&bases)?;
    let nb = bases.len();
    let settings = nb.pow(k as u32);
    let outcomes = dim;
    let joint = nb * d;

    // weights[J_1 .. J_k] with J_l = a_l * d + o_l; only entries with the
    // matching setting are nonzero
    let mut weights = vec![0.0f64; joint.pow(k as u32)];
    let base_shots = kept / settings as u64;
    let extra = (kept % settings as u64) as usize;
    for s in 0..settings {
        let shots = base_shots + u64::from(s < extra);
        if shots == 0 {
            continue;
        }
        let setting = crate::linalg::to_digits(s, nb, k);
        let mut u = ComplexMatrix::identity(1);
        for &a in &setting {
            u = u.kron(&bases[a]);
        }
        let rotated = u.adjoint().matmul(&rho).matmul(&u);
        let probs: Vec<f64> = (0..outcomes).map(|o| rotated[(o, o)].re).collect();
        let counts = multinomial(&mut r, shots, &probs);
        for (o, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let digits = crate::linalg::to_digits(o, d, k);
            let mut idx = 0;
            for l in 0..k {
                idx = idx * joint + setting[l] * d + digits[l];
            }
            weights[idx] = c as f64 / shots as f64;
        }
    }

    // the product frame sums over every setting with unit weight
    let mut tensor: Vec<C64> = weights.iter().map(|&w| real(w)).collect();
    // mode l: J_l (size joint) -> (i_l, j_l) (size d*d)
    let dd = d * d;
    for l in 0..k {
        let before = dd.pow(l as u32);
        let after = joint.pow((k - l - 1) as u32);
        let mut next = vec![ZERO; before * dd * after];
        for b in 0..before {
            for jl in 0..joint {
                let dual = duals[jl].as_slice();
                for a in 0..after {
                    let w = tensor[(b * joint + jl) * after + a];
                    if w == ZERO {
                        continue;
                    }
                    for (e, &x) in dual.iter().enumerate() {
                        next[(b * dd + e) * after + a] += w * x;
                    }
                }
            }
        }
        tensor = next;
    }
    // tensor index (i_1 j_1, ..., i_k j_k) -> matrix (i_1..i_k, j_1..j_k)
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (idx, &x) in tensor.iter().enumerate() {
        let pairs = crate::linalg::to_digits(idx, dd, k);
        let mut row = 0;
        let mut col = 0;
        for p in pairs {
            row = row * d + p / d;
            col = col * d + p % d;
        }
        out[(row, col)] = x;
    }
    let mut estimate = out.hermitian_part();
    estimate.scale_mut(real(kept as f64 / copies as f64));
    Ok(estimate)
}

fn check_budget_inputs(mu: f64, eta: f64, delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::BadParameter(format!("success mass {mu} outside [0, 1]")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::BadParameter(format!("accuracy {eta} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParameter(format!("failure probability {delta} outside (0, 1)")));
    }
    Ok(())
}

fn saturating_ceil(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        libm::ceil(x) as u64
    }
}

/// `ceil(C mu D^2 d^(r-i) ln(1/delta) / eta^2)`.
pub fn budget_rank_constrained_scaled(
    constant: f64,
    mu: f64,
    bond: usize,
    d: usize,
    r_minus_i: usize,
    eta: f64,
    delta: f64,
) -> Result<u64> {
    check_budget_inputs(mu, eta, delta)?;
    if bond == 0 || d < 2 || r_minus_i == 0 {
        return Err(Error::BadParameter(format!("bond {bond}, d {d}, block size {r_minus_i}")));
    }
    let b = bond as f64;
    let value = constant * mu * b * b * libm::pow(d as f64, r_minus_i as f64) * libm::log(1.0 / delta) / (eta * eta);
    Ok(saturating_ceil(value))
}

pub fn budget_rank_constrained(mu: f64, bond: usize, d: usize, r_minus_i: usize, eta: f64, delta: f64) -> Result<u64> {
    budget_rank_constrained_scaled(1.0, mu, bond, d, r_minus_i, eta, delta)
}

/// `ceil(C mu d^(2(r-i)) ln(1/delta) / eta^2)`.
pub fn budget_general_scaled(constant: f64, mu: f64, d: usize, r_minus_i: usize, eta: f64, delta: f64) -> Result<u64> {
    check_budget_inputs(mu, eta, delta)?;
    if d < 2 || r_minus_i == 0 {
        return Err(Error::BadParameter(format!("d {d}, block size {r_minus_i}")));
    }
    let value = constant * mu * libm::pow(d as f64, 2.0 * r_minus_i as f64) * libm::log(1.0 / delta) / (eta * eta);
    Ok(saturating_ceil(value))
}

pub fn budget_general(mu: f64, d: usize, r_minus_i: usize, eta: f64, delta: f64) -> Result<u64> {
    budget_general_scaled(1.0, mu, d, r_minus_i, eta, delta)
}

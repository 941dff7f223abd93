//! The layered learning loop and everything that reads its output.
//!
//! Each layer estimates every block state of the current register, builds a
//! disentangler per block, then applies the block maps
//! `K = (<0^f| (x) I) U` all at once. `K` is simply the first `d^{y-f}` rows of
//! `U`, and `K^dagger` lifts a residual back to the larger register.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::backend::{apply_to_state, Backend, Register};
pub use crate::complexity::{eta_closest, eta_exact};
use crate::disentangler::{build_rank_capped, build_threshold, Disentangler};
use crate::error::{Error, Result};
use crate::lambert::solve_p_closest;
use crate::linalg::{checked_pow, hermitian_eig, svd, trace_distance, ComplexMatrix, ComplexVector, C64, ZERO};
use crate::mps::{Boundary, MatrixProductState, SiteTensor};
use crate::plan::{depth_for, p_exact, plan_layers, LayerPlan};
use crate::rng::derive_seed;
use crate::tomography::{budget_general_scaled, budget_rank_constrained_scaled, estimate_from_block_state, OracleMode};

/// Largest block state the oracle is asked to estimate.
pub const MAX_BLOCK_DIM: usize = 1 << 10;

/// Relative cut for singular values dropped by `extract_mps`.
pub const EXTRACT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Exact,
    Closest,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::Closest => "closest",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Variant::Exact),
            "closest" => Ok(Variant::Closest),
            _ => Err(Error::BadParameter(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnParams {
    pub bond: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub variant: Variant,
    /// Replaces the block size the variant would choose.
    pub block_size: Option<usize>,
    /// Fidelity promise; recorded, never read.
    pub theta: Option<f64>,
    pub audit: bool,
    pub seed: u64,
    /// Constant in front of every copy budget.
    pub budget_constant: f64,
    /// Noise level of the bounded-noise oracle relative to the accuracy the
    /// algorithm asks for.
    pub noise_scale: f64,
}

impl LearnParams {
    pub fn new(bond: usize, epsilon: f64, delta: f64, variant: Variant) -> Self {
        LearnParams {
            bond,
            epsilon,
            delta,
            variant,
            block_size: None,
            theta: None,
            audit: false,
            seed: 0,
            budget_constant: 1.0,
            noise_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bond == 0 {
            return Err(Error::BadParameter(String::from("bond dimension 0")));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::BadEpsilon(self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadParameter(format!("delta {} outside (0, 1)", self.delta)));
        }
        if self.block_size == Some(0) {
            return Err(Error::BadParameter(String::from("block size 0")));
        }
        if !(self.budget_constant > 0.0) || !(self.noise_scale > 0.0) {
            return Err(Error::BadParameter(String::from("budget constant and noise scale must be positive")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockRecord {
    pub j: usize,
    pub i: usize,
    /// Original site labels.
    pub support: Vec<usize>,
    /// Sites projected onto `|0>` after the unitary.
    pub projected_sites: Vec<usize>,
    pub carried: Vec<usize>,
    pub register_offset: usize,
    /// `None` for idle first-layer blocks.
    pub disentangler: Option<Disentangler>,
}

impl BlockRecord {
    /// `(<0^f| (x) I) U`.
    pub fn block_map(&self) -> Option<ComplexMatrix> {
        let u = &self.disentangler.as_ref()?.unitary;
        let d = self.disentangler.as_ref()?.d;
        let rows = d.pow(self.carried.len() as u32);
        Some(ComplexMatrix::from_fn(rows, u.cols(), |a, b| u[(a, b)]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitMetadata {
    pub variant: Variant,
    pub mode: OracleMode,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub bond: usize,
    pub eta: f64,
    pub tau: f64,
    pub theta: Option<f64>,
    pub deviations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitDescription {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    /// `None` on the trivial path.
    pub plan: Option<LayerPlan>,
    pub layers: Vec<Vec<BlockRecord>>,
    pub final_sites: Vec<usize>,
    pub residual: ComplexVector,
    pub metadata: CircuitMetadata,
}

impl CircuitDescription {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.plan.is_none()
    }

    /// Structural checks against the plan; the residual must be a unit vector.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedCircuit(msg));
        match &self.plan {
            None => {
                if !self.layers.is_empty() || self.final_sites != (0..self.n).collect::<Vec<_>>() {
                    return bad(String::from("trivial circuit must keep every site"));
                }
            }
            Some(plan) => {
                plan.check()?;
                if plan.n != self.n || plan.d != self.d || plan.p != self.p || plan.depth != self.layers.len() {
                    return bad(String::from("plan header disagrees with circuit"));
                }
                for (layer, records) in plan.layers.iter().zip(&self.layers) {
                    if layer.blocks.len() != records.len() {
                        return bad(format!("layer {} has {} records for {} blocks", layer.j, records.len(), layer.blocks.len()));
                    }
                    for (b, r) in layer.blocks.iter().zip(records) {
                        if r.j != layer.j || r.i != b.i || r.support != b.support || r.carried != b.carried {
                            return bad(format!("block ({}, {}) does not match the plan", layer.j, b.i));
                        }
                        if r.register_offset != b.register_offset || r.projected_sites[..] != b.support[..b.projected] {
                            return bad(format!("block ({}, {}) projects the wrong sites", layer.j, b.i));
                        }
                        match (&r.disentangler, b.acted) {
                            (Some(u), true) => {
                                if checked_pow(self.d, b.support.len()) != Some(u.dim()) || u.d != self.d {
                                    return bad(format!("block ({}, {}) unitary has dimension {}", layer.j, b.i, u.dim()));
                                }
                            }
                            (None, false) => {}
                            _ => return bad(format!("block ({}, {}) acted flag disagrees", layer.j, b.i)),
                        }
                    }
                }
                if self.final_sites != plan.final_sites() {
                    return bad(String::from("final sites disagree with the plan"));
                }
            }
        }
        if checked_pow(self.d, self.final_sites.len()) != Some(self.residual.len()) {
            return bad(format!("residual of length {} on {} sites", self.residual.len(), self.final_sites.len()));
        }
        if (self.residual.norm() - 1.0).abs() > 1e-8 {
            return bad(format!("residual norm {}", self.residual.norm()));
        }
        Ok(())
    }

    /// Register length before layer `j` (one-based); `j = depth + 1` gives the
    /// final register.
    pub fn register_len(&self, j: usize) -> usize {
        match &self.plan {
            None => self.n,
            Some(plan) if j <= plan.depth => plan.layer(j).register_len,
            Some(_) => self.final_sites.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub i: usize,
    pub support: Vec<usize>,
    /// Trace of the true block state.
    pub success_mass: f64,
    /// Charged by the budget formula.
    pub copies: u64,
    /// Drawn by the simulated oracle.
    pub simulated_copies: u64,
    /// `||sigma_hat - sigma||_1`, recorded in audit mode.
    pub trace_distance: Option<f64>,
    /// `Tr[(I - Pi) sigma]` for the subspace the block keeps, in audit mode.
    pub discarded_weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    pub j: usize,
    pub mass_before: f64,
    pub mass_after: f64,
    pub blocks: Vec<BlockReport>,
    pub fidelity_drop_bound: f64,
}

impl LayerReport {
    pub fn copies(&self) -> u64 {
        self.blocks.iter().fold(0u64, |acc, b| acc.saturating_add(b.copies))
    }
}

/// Per-layer residual states `(rho^j)'` for `j = 0..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditTrail {
    pub snapshots: Vec<Backend>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnReport {
    /// `<phi_hat| rho |phi_hat>`.
    pub final_fidelity: f64,
    /// Sum of every charged budget, final tomography included.
    pub copies_used: u64,
    pub simulated_copies: u64,
    pub final_copies: u64,
    pub final_mass: f64,
    pub eta: f64,
    pub tau: f64,
    pub p: usize,
    pub depth: usize,
    pub per_layer: Vec<LayerReport>,
    pub deviations: Vec<String>,
    pub audit: Option<AuditTrail>,
}

fn qudit_count(dim: usize, d: usize) -> Result<usize> {
    let mut n = 0;
    let mut acc = 1usize;
    while acc < dim {
        acc = acc.saturating_mul(d);
        n += 1;
    }
    if acc != dim || d < 2 {
        return Err(Error::DimensionMismatch(format!("{dim} is not a power of {d}")));
    }
    Ok(n)
}

/// Block size and the deviations it implies.
pub fn choose_block_size(n: usize, d: usize, params: &LearnParams) -> Result<(usize, Vec<String>)> {
    let mut notes = Vec::new();
    if let Some(p) = params.block_size {
        notes.push(format!("block size fixed to {p} by the caller"));
        return Ok((p, notes));
    }
    match params.variant {
        Variant::Exact => {
            let p = p_exact(d, params.bond);
            if p == 0 {
                notes.push(String::from("bond dimension 1 gives block size 0; raised to 1"));
                return Ok((1, notes));
            }
            Ok((p, notes))
        }
        Variant::Closest => {
            let s = solve_p_closest(n, d, params.bond, params.epsilon)?;
            if !s.exists {
                return Err(Error::PlanInfeasible(format!(
                    "no integer block size solves p d^(p-1) < B <= p d^p for B = {:e}; pick epsilon with select_epsilon",
                    s.b
                )));
            }
            Ok((s.p_candidate, notes))
        }
    }
}

fn block_mode(mode: &OracleMode, labels: &[u64], eta: f64) -> Result<OracleMode> {
    let m = mode.derived(labels).with_eta(eta);
    m.validate()?;
    Ok(m)
}

/// Runs the learner on `input`, a pure or mixed state of qudits of dimension `d`.
pub fn learn(input: Backend, d: usize, params: &LearnParams, mode: &OracleMode) -> Result<(CircuitDescription, LearnReport)> {
    params.validate()?;
    mode.validate()?;
    let n = qudit_count(input.dim(), d)?;
    let mut register = match &input {
        Backend::Pure(v) => Register::pure(v.clone(), d)?,
        Backend::Mixed(m) => Register::mixed(m.clone(), d)?,
    };
    let (p, mut deviations) = choose_block_size(n, d, params)?;
    let trivial = n <= 2 * p;
    let plan = if trivial {
        deviations.push(format!("n = {n} <= 2p = {}: final tomography on the whole register", 2 * p));
        None
    } else {
        let plan = plan_layers(n, d, p).map_err(|e| match e {
            Error::TooSmall { .. } => Error::PlanInfeasible(format!("{e}")),
            other => other,
        })?;
        if plan.s1_amended {
            deviations.push(format!("remainder n - 2^(M-1) p vanished; s1 raised from 0 to p = {p}"));
        }
        Some(plan)
    };
    let depth = plan.as_ref().map_or(depth_for(n, p), |pl| pl.depth);
    let eta = match params.variant {
        Variant::Exact => eta_exact(params.epsilon, depth),
        Variant::Closest => eta_closest(params.epsilon, p, params.bond, n),
    };
    let tau = params.epsilon / 4.0;
    let call_delta = params.delta / n as f64;
    if params.variant == Variant::Exact && params.bond * params.bond > d.pow(p.min(30) as u32) && !trivial {
        return Err(Error::PlanInfeasible(format!(
            "kept dimension {d}^{p} is below the rank cap D^2 = {}",
            params.bond * params.bond
        )));
    }

    let mut snapshots = Vec::new();
    if params.audit {
        snapshots.push(register.state.clone());
    }
    let mut layers = Vec::new();
    let mut per_layer = Vec::new();
    let mut copies_used = 0u64;
    let mut simulated = 0u64;

    if let Some(plan) = &plan {
        for layer in &plan.layers {
            let dims = register.dims();
            let mass_before = register.state.mass();
            let mut records = Vec::with_capacity(layer.blocks.len());
            let mut reports = Vec::new();
            for b in &layer.blocks {
                let projected_sites = b.support[..b.projected].to_vec();
                if !b.acted {
                    records.push(BlockRecord {
                        j: layer.j,
                        i: b.i,
                        support: b.support.clone(),
                        projected_sites,
                        carried: b.carried.clone(),
                        register_offset: b.register_offset,
                        disentangler: None,
                    });
                    continue;
                }
                let y = b.support.len();
                let block_dim = checked_pow(d, y).filter(|&x| x <= MAX_BLOCK_DIM).ok_or_else(|| {
                    Error::BackendTooLarge(format!("block of {y} qudits exceeds dimension {MAX_BLOCK_DIM}"))
                })?;
                let sigma = register.block_state(b.register_offset, y)?;
                let labels = [layer.j as u64, b.i as u64];
                let call_mode = block_mode(mode, &labels, eta * params.noise_scale)?;
                let outcome = estimate_from_block_state(&sigma, &dims[..y], &call_mode)?;
                let mu = outcome.success_mass.clamp(0.0, 1.0);
                let copies = match params.variant {
                    Variant::Exact => budget_rank_constrained_scaled(params.budget_constant, mu, params.bond, d, y, eta, call_delta)?,
                    Variant::Closest => budget_general_scaled(params.budget_constant, mu, d, y, eta, call_delta)?,
                };
                copies_used = copies_used.saturating_add(copies);
                simulated = simulated.saturating_add(outcome.copies_used);
                let seed = derive_seed(params.seed, &labels);
                let u = match params.variant {
                    Variant::Exact => build_rank_capped(&outcome.estimate, d, params.bond * params.bond, p, seed)?,
                    Variant::Closest => build_threshold(&outcome.estimate, d, eta, seed)?,
                };
                debug_assert_eq!(u.dim(), block_dim);
                let record = BlockRecord {
                    j: layer.j,
                    i: b.i,
                    support: b.support.clone(),
                    projected_sites,
                    carried: b.carried.clone(),
                    register_offset: b.register_offset,
                    disentangler: Some(u),
                };
                let (dist, discarded) = if params.audit {
                    let k = record.block_map().ok_or_else(|| Error::MalformedCircuit(String::from("missing unitary")))?;
                    let kept = k.matmul(&sigma).matmul(&k.adjoint()).trace().re;
                    (Some(trace_distance(&outcome.estimate, &sigma)?), Some(sigma.trace().re - kept))
                } else {
                    (None, None)
                };
                reports.push(BlockReport {
                    i: b.i,
                    support: b.support.clone(),
                    success_mass: outcome.success_mass,
                    copies,
                    simulated_copies: outcome.copies_used,
                    trace_distance: dist,
                    discarded_weight: discarded,
                });
                records.push(record);
            }
            // right to left so earlier offsets stay valid
            for r in records.iter().rev() {
                if let Some(k) = r.block_map() {
                    register.apply(&k, r.register_offset, r.support.len(), &r.carried)?;
                }
            }
            let scale = match params.variant {
                Variant::Exact => 1.0,
                Variant::Closest => (params.bond * params.bond) as f64,
            };
            let fidelity_drop_bound = 2.0 * libm::sqrt(2.0 * eta * scale * libm::pow(2.0, (plan.depth - layer.j) as f64));
            per_layer.push(LayerReport {
                j: layer.j,
                mass_before,
                mass_after: register.state.mass(),
                blocks: reports,
                fidelity_drop_bound,
            });
            if params.audit {
                snapshots.push(register.state.clone());
            }
            layers.push(records);
        }
    }

    // final tomography with error tau on everything left
    let final_len = register.len();
    let final_dim = checked_pow(d, final_len).filter(|&x| x <= MAX_BLOCK_DIM).ok_or_else(|| {
        Error::BackendTooLarge(format!("final register of {final_len} qudits exceeds dimension {MAX_BLOCK_DIM}"))
    })?;
    let sigma = register.block_state(0, final_len)?;
    let final_mode = block_mode(mode, &[0, 0], tau * params.noise_scale)?;
    let outcome = estimate_from_block_state(&sigma, &register.dims(), &final_mode)?;
    let final_mass = outcome.success_mass;
    let final_copies =
        budget_general_scaled(params.budget_constant, final_mass.clamp(0.0, 1.0), d, final_len, tau, call_delta)?;
    copies_used = copies_used.saturating_add(final_copies);
    simulated = simulated.saturating_add(outcome.copies_used);
    let eig = hermitian_eig(&outcome.estimate)?;
    let mut residual = eig.vectors.into_iter().next().unwrap_or_else(|| ComplexVector::basis(final_dim, 0));
    residual.phase_normalize();

    let circuit = CircuitDescription {
        n,
        d,
        p,
        final_sites: register.sites.clone(),
        plan,
        layers,
        residual,
        metadata: CircuitMetadata {
            variant: params.variant,
            mode: *mode,
            seed: params.seed,
            epsilon: params.epsilon,
            delta: params.delta,
            bond: params.bond,
            eta,
            tau,
            theta: params.theta,
            deviations: deviations.clone(),
        },
    };
    circuit.check()?;
    let phi_hat = reconstruct_state(&circuit)?;
    let final_fidelity = input.expectation(&phi_hat)?;
    let report = LearnReport {
        final_fidelity,
        copies_used,
        simulated_copies: simulated,
        final_copies,
        final_mass,
        eta,
        tau,
        p,
        depth: circuit.depth(),
        per_layer,
        deviations,
        audit: params.audit.then_some(AuditTrail { snapshots }),
    };
    Ok((circuit, report))
}

/// Applies layer `j` (one-based) forward: unitaries, then zero projections.
pub fn apply_layer(circuit: &CircuitDescription, j: usize, state: &Backend) -> Result<Backend> {
    let records = circuit
        .layers
        .get(j.wrapping_sub(1))
        .ok_or_else(|| Error::OutOfRange(format!("layer {j} of {}", circuit.depth())))?;
    let mut n = circuit.register_len(j);
    let mut out = state.clone();
    for r in records.iter().rev() {
        if let Some(k) = r.block_map() {
            out = apply_to_state(&out, circuit.d, n, &k, r.register_offset, r.support.len())?;
            n -= r.projected_sites.len();
        }
    }
    Ok(out)
}

/// Adjoint of [`apply_layer`]: re-inserts `|0>` on projected sites and undoes
/// the unitaries.
pub fn lift_layer(circuit: &CircuitDescription, j: usize, state: &Backend) -> Result<Backend> {
    let records = circuit
        .layers
        .get(j.wrapping_sub(1))
        .ok_or_else(|| Error::OutOfRange(format!("layer {j} of {}", circuit.depth())))?;
    let mut offsets = Vec::with_capacity(records.len());
    let mut acc = 0;
    for r in records {
        offsets.push(acc);
        acc += r.carried.len();
    }
    let mut n = acc;
    let mut out = state.clone();
    for (r, &off) in records.iter().zip(&offsets).rev() {
        if let Some(k) = r.block_map() {
            out = apply_to_state(&out, circuit.d, n, &k.adjoint(), off, r.carried.len())?;
            n += r.projected_sites.len();
        }
    }
    Ok(out)
}

/// `(U^1)^dagger ... (U^M)^dagger (|0 ... 0> (x) |psi_hat>)`.
pub fn reconstruct_state(circuit: &CircuitDescription) -> Result<ComplexVector> {
    let mut state = Backend::Pure(circuit.residual.clone());
    for j in (1..=circuit.depth()).rev() {
        state = lift_layer(circuit, j, &state)?;
    }
    match state {
        Backend::Pure(v) => Ok(v),
        Backend::Mixed(_) => Err(Error::MalformedCircuit(String::from("lift produced a mixed state"))),
    }
}

/// Component of `E^j |phi>` in the all-zeros projected sector, on the
/// carried qudits.
pub fn residual_projection(circuit: &CircuitDescription, phi: &ComplexVector, j: usize) -> Result<ComplexVector> {
    if j > circuit.depth() {
        return Err(Error::OutOfRange(format!("level {j} of {}", circuit.depth())));
    }
    if checked_pow(circuit.d, circuit.n) != Some(phi.len()) {
        return Err(Error::DimensionMismatch(format!("vector of length {} on {} sites", phi.len(), circuit.n)));
    }
    let mut state = Backend::Pure(phi.clone());
    for k in 1..=j {
        state = apply_layer(circuit, k, &state)?;
    }
    match state {
        Backend::Pure(v) => Ok(v),
        Backend::Mixed(_) => unreachable!("forward map keeps vectors pure"),
    }
}

/// `rho^j` on the full register. Pure runs return the (sub-normalized)
/// vector `w` with `rho^j = |w><w|`.
pub fn stepwise_state(circuit: &CircuitDescription, audit: Option<&AuditTrail>, j: usize) -> Result<Backend> {
    let audit = audit.ok_or(Error::AuditDisabled)?;
    let snap = audit
        .snapshots
        .get(j)
        .ok_or_else(|| Error::OutOfRange(format!("level {j}, {} snapshots", audit.snapshots.len())))?;
    let mut state = snap.clone();
    for k in (1..=j).rev() {
        state = lift_layer(circuit, k, &state)?;
    }
    Ok(state)
}

/// `<phi| rho^j |phi>` for `j = 0..=M`, through the residual identity.
pub fn layer_fidelities(circuit: &CircuitDescription, audit: Option<&AuditTrail>, phi: &ComplexVector) -> Result<Vec<f64>> {
    let audit = audit.ok_or(Error::AuditDisabled)?;
    let mut out = Vec::with_capacity(audit.snapshots.len());
    let mut psi = Backend::Pure(phi.clone());
    for (j, snap) in audit.snapshots.iter().enumerate() {
        if j > 0 {
            psi = apply_layer(circuit, j, &psi)?;
        }
        let Backend::Pure(v) = &psi else { unreachable!("forward map keeps vectors pure") };
        out.push(snap.expectation(v)?);
    }
    Ok(out)
}

/// Smallest eigenvalue of `a - b`.
pub fn min_eig_difference(a: &Backend, b: &Backend) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    match (a, b) {
        (Backend::Pure(x), Backend::Pure(y)) => Ok(rank_two_min_eig(x, y)),
        _ => Ok(hermitian_eig(&(&a.density() - &b.density()))?.min_value()),
    }
}

/// Smallest eigenvalue of `|x><x| - |y><y|`, found in `span(x, y)`; the
/// complement contributes zeros when the space is larger.
fn rank_two_min_eig(x: &ComplexVector, y: &ComplexVector) -> f64 {
    let nx = x.norm();
    let zero_floor = if x.len() > 2 { 0.0 } else { f64::INFINITY };
    if nx < 1e-300 {
        return (-y.norm_sqr()).min(zero_floor);
    }
    let e1 = x.scaled(C64::new(1.0 / nx, 0.0));
    let c = e1.inner(y);
    let mut rest = y.clone();
    rest.axpy(-c, &e1);
    let r = rest.norm();
    // coordinates: x = (nx, 0), y = (c, r)
    let a11 = nx * nx - c.norm_sqr();
    let a22 = -r * r;
    let a12 = -(c * r).norm();
    let mean = 0.5 * (a11 + a22);
    let half_gap = libm::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    let low = mean - half_gap;
    if r < 1e-300 {
        return a11.min(zero_floor);
    }
    low.min(zero_floor)
}

/// `d^{M+1} D^{2(M+1)}`, saturating.
pub fn extraction_bond_bound(d: usize, bond: usize, depth: usize) -> usize {
    let base = d.saturating_mul(bond.saturating_mul(bond));
    (0..=depth).fold(1usize, |acc, _| acc.saturating_mul(base))
}

/// One tensor of a train: `data[(a * phys + s) * right + b]`.
#[derive(Clone, Debug)]
struct Core {
    left: usize,
    phys: usize,
    right: usize,
    data: Vec<C64>,
}

const MAX_CORE: usize = 1 << 22;

fn merge(cores: &[Core]) -> Result<Core> {
    let mut acc = cores[0].clone();
    for c in &cores[1..] {
        let phys = acc.phys * c.phys;
        let size = acc.left * phys * c.right;
        if size > MAX_CORE {
            return Err(Error::TooLarge(format!("merged core of {size} entries")));
        }
        let mut data = vec![ZERO; size];
        for a in 0..acc.left {
            for s in 0..acc.phys {
                for m in 0..acc.right {
                    let w = acc.data[(a * acc.phys + s) * acc.right + m];
                    if w == ZERO {
                        continue;
                    }
                    for t in 0..c.phys {
                        let src = &c.data[(m * c.phys + t) * c.right..(m * c.phys + t + 1) * c.right];
                        let off = (a * phys + s * c.phys + t) * c.right;
                        for (o, v) in data[off..off + c.right].iter_mut().zip(src) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
        acc = Core { left: acc.left, phys, right: c.right, data };
    }
    Ok(acc)
}

fn apply_physical(core: &Core, op: &ComplexMatrix) -> Core {
    let phys = op.rows();
    let mut data = vec![ZERO; core.left * phys * core.right];
    for a in 0..core.left {
        for s2 in 0..phys {
            let row = op.row(s2);
            let off = (a * phys + s2) * core.right;
            for (s, &w) in row.iter().enumerate() {
                if w == ZERO {
                    continue;
                }
                let src = &core.data[(a * core.phys + s) * core.right..(a * core.phys + s + 1) * core.right];
                for (o, v) in data[off..off + core.right].iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
    }
    Core { left: core.left, phys, right: core.right, data }
}

/// Splits a core whose physical index covers `sites` qudits into single-site
/// cores by successive SVDs, dropping only negligible singular values.
fn split(core: Core, d: usize, sites: usize) -> Result<Vec<Core>> {
    let mut out = Vec::with_capacity(sites);
    let mut rest = core;
    for _ in 1..sites {
        let tail = rest.phys / d;
        let rows = rest.left * d;
        let cols = tail * rest.right;
        let mat = ComplexMatrix::from_vec(rows, cols, rest.data.clone());
        let f = svd(&mat)?;
        let smax = f.s.first().copied().unwrap_or(0.0);
        let keep = f.s.iter().filter(|&&s| s > EXTRACT_CUTOFF * smax).count().max(1);
        let mut head = Vec::with_capacity(rows * keep);
        for r in 0..rows {
            for k in 0..keep {
                head.push(f.u[(r, k)]);
            }
        }
        out.push(Core { left: rest.left, phys: d, right: keep, data: head });
        let mut data = Vec::with_capacity(keep * cols);
        for k in 0..keep {
            for c in 0..cols {
                data.push(f.v[(c, k)].conj() * f.s[k]);
            }
        }
        rest = Core { left: keep, phys: tail, right: rest.right, data };
    }
    out.push(rest);
    Ok(out)
}

/// Contracts the adjoint circuit into an open-boundary MPS, exactly up to
/// singular values below `EXTRACT_CUTOFF` relative.
pub fn extract_mps(circuit: &CircuitDescription) -> Result<MatrixProductState> {
    circuit.check()?;
    let d = circuit.d;
    let top = Core { left: 1, phys: circuit.residual.len(), right: 1, data: circuit.residual.as_slice().to_vec() };
    let mut train = split(top, d, circuit.final_sites.len())?;
    for records in circuit.layers.iter().rev() {
        let mut offsets = Vec::with_capacity(records.len());
        let mut acc = 0;
        for r in records {
            offsets.push(acc);
            acc += r.carried.len();
        }
        for (r, &off) in records.iter().zip(&offsets).rev() {
            let Some(k) = r.block_map() else { continue };
            let merged = merge(&train[off..off + r.carried.len()])?;
            let lifted = apply_physical(&merged, &k.adjoint());
            let pieces = split(lifted, d, r.support.len())?;
            train.splice(off..off + r.carried.len(), pieces);
        }
    }
    let sites = train
        .into_iter()
        .map(|c| {
            let mats = (0..d)
                .map(|s| ComplexMatrix::from_fn(c.left, c.right, |a, b| c.data[(a * d + s) * c.right + b]))
                .collect();
            SiteTensor::new(mats)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixProductState::from_sites(d, Boundary::Open, sites)
}

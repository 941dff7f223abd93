//! Property suites behind `treemps verify`.

use std::fmt;
use std::str::FromStr;

use treemps_core::backend::{apply_to_vector, Backend};
use treemps_core::complexity::{dominance_ratio, eta_closest, eta_exact, BudgetInputs, Formula};
use treemps_core::disentangler::{build_rank_capped, build_threshold};
use treemps_core::lambert::{lambert_w, left_end, right_end, solve_for_b, solve_p_closest};
use treemps_core::learner::{layer_fidelities, learn, min_eig_difference, stepwise_state, LearnParams, LearnReport, Variant};
use treemps_core::learner::CircuitDescription;
use treemps_core::linalg::{hermitian_eig, numerical_rank, operator_norm, partial_trace, trace_norm};
use treemps_core::mps::{random_mps, Boundary, StateSpec};
use treemps_core::plan::{depth_for, plan_layers};
use treemps_core::rng;
use treemps_core::tomography::{estimate_from_block_state, OracleMode};
use treemps_core::{ComplexMatrix, ComplexVector, Error, C64};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Rank,
    EckartYoung,
    Monotonicity,
    LayerBounds,
    Lambert,
    Plan,
    Dominance,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Rank,
        Suite::EckartYoung,
        Suite::Monotonicity,
        Suite::LayerBounds,
        Suite::Lambert,
        Suite::Plan,
        Suite::Dominance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Rank => "rank",
            Suite::EckartYoung => "eckart-young",
            Suite::Monotonicity => "monotonicity",
            Suite::LayerBounds => "layer-bounds",
            Suite::Lambert => "lambert",
            Suite::Plan => "plan",
            Suite::Dominance => "dominance",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Rank | Suite::EckartYoung => 100,
            Suite::Monotonicity | Suite::LayerBounds => 5,
            Suite::Lambert => 1000,
            Suite::Plan | Suite::Dominance => 1,
        }
    }

    pub fn run(self, trials: usize) -> Vec<Property> {
        let out = match self {
            Suite::Rank => rank(trials),
            Suite::EckartYoung => eckart_young(trials),
            Suite::Monotonicity => monotonicity(trials),
            Suite::LayerBounds => layer_bounds(trials),
            Suite::Lambert => lambert(trials),
            Suite::Plan => plan(),
            Suite::Dominance => dominance(),
        };
        out.unwrap_or_else(|e| vec![Property::fail(self, "suite ran to completion", e.to_string())])
            .into_iter()
            .map(|p| Property { suite: self, ..p })
            .collect()
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `all` expands to every suite.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>, CliError> {
    if s == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    Ok(vec![s.parse()?])
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            CliError::input(format!(
                "unknown suite `{s}` (expected rank, eckart-young, monotonicity, layer-bounds, lambert, plan, dominance or all)"
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub suite: Suite,
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl Property {
    fn check(suite: Suite, name: &str, ok: bool, detail: String) -> Self {
        Property { suite, name: name.into(), ok, detail }
    }

    fn fail(suite: Suite, name: &str, detail: String) -> Self {
        Self::check(suite, name, false, detail)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.ok { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

type SuiteResult = Result<Vec<Property>, Error>;

fn unit_mps(n: usize, d: usize, bond: usize, boundary: Boundary, seed: u64) -> Result<ComplexVector, Error> {
    let spec = StateSpec { boundary, ..StateSpec::random(n, d, bond, seed) };
    let mut m = random_mps(&spec)?;
    m.normalize()?;
    m.expand()
}

/// Rank of a pure state's block marginal, taken on the smaller side of the cut.
fn block_rank(rho: &ComplexMatrix, n: usize, block: &[usize]) -> Result<usize, Error> {
    let rest: Vec<usize> = (0..n).filter(|s| !block.contains(s)).collect();
    if rest.is_empty() {
        return Ok(1);
    }
    let keep = if block.len() <= rest.len() { block } else { &rest[..] };
    numerical_rank(&partial_trace(rho, &vec![2; n], keep)?, 1e-10)
}

fn rank(trials: usize) -> SuiteResult {
    let s = Suite::Rank;
    let mut r = rng::seeded(77);
    let (mut blocks, mut worst_excess, mut invariant_ok) = (0usize, isize::MIN, true);
    let mut first_bad = None;
    for trial in 0..trials as u64 {
        let n = 4 + (trial as usize % 5);
        let bond = if trial % 2 == 0 { 2 } else { 3 };
        let boundary = if trial % 4 < 2 { Boundary::Open } else { Boundary::Periodic };
        let psi = unit_mps(n, 2, bond, boundary, trial)?;
        let rho = psi.projector();
        for start in 0..n {
            for end in start + 1..=n {
                let block: Vec<usize> = (start..end).collect();
                let k = block_rank(&rho, n, &block)?;
                blocks += 1;
                worst_excess = worst_excess.max(k as isize - (bond * bond) as isize);
                if k > bond * bond && first_bad.is_none() {
                    first_bad = Some(format!("trial {trial}: block {start}..{end} has rank {k}"));
                }
            }
        }
        let u_in = rng::random_unitary(&mut r, 4);
        let u_out = rng::random_unitary(&mut r, 2);
        let moved = apply_to_vector(&apply_to_vector(&psi, 2, n, &u_in, 1, 2)?, 2, n, &u_out, 0, 1)?;
        if block_rank(&rho, n, &[1, 2])? != block_rank(&moved.projector(), n, &[1, 2])? {
            invariant_ok = false;
        }
    }
    Ok(vec![
        Property::check(
            s,
            "block rank at most D^2",
            first_bad.is_none(),
            first_bad.unwrap_or_else(|| format!("{trials} states, {blocks} blocks, max rank - D^2 = {worst_excess}")),
        ),
        Property::check(s, "rank unchanged by local unitaries", invariant_ok, format!("{trials} states")),
    ])
}

fn eckart_young(trials: usize) -> SuiteResult {
    let s = Suite::EckartYoung;
    let mut r = rng::seeded(4);
    let (mut worst_tail, mut worst_top, mut worst_leak) = (0f64, 0f64, 0f64);
    for (k, &eta) in [1e-1, 1e-2, 1e-3].iter().enumerate() {
        for trial in 0..trials as u64 {
            let (d, sites, bond): (usize, usize, usize) = if trial % 2 == 0 { (2, 4, 2) } else { (3, 3, 3) };
            let dim = d.pow(sites as u32);
            let sigma = rng::random_density_matrix(&mut r, dim, 1 + trial as usize % (bond * bond));
            let mode = OracleMode::noise(eta, trial * 7 + k as u64);
            let hat = estimate_from_block_state(&sigma, &vec![d; sites], &mode)?.estimate;
            let u = build_rank_capped(&hat, d, bond * bond, 2, trial)?;
            let pi = u.selected_projector();
            let tail = (&ComplexMatrix::identity(dim) - &pi).matmul(&sigma).trace().re;
            worst_tail = worst_tail.max(tail / eta);
            let eig = hermitian_eig(&hat)?;
            let top: f64 = eig.values[..bond * bond].iter().sum();
            worst_top = worst_top.max((pi.matmul(&hat).trace().re - top).abs());

            let mut delta = rng::random_hermitian(&mut r, dim);
            let shift = delta.trace() / dim as f64;
            for i in 0..dim {
                delta[(i, i)] -= shift;
            }
            let size = operator_norm(&delta)?;
            delta.scale_mut(C64::new(eta / size, 0.0));
            let t = build_threshold(&(&sigma + &delta), d, eta, trial)?;
            let comp = &ComplexMatrix::identity(dim) - &t.selected_projector();
            worst_leak = worst_leak.max(operator_norm(&comp.matmul(&sigma).matmul(&comp))? / eta);
            let dist = trace_norm(&(&hat - &sigma))?;
            if (dist - eta).abs() > 1e-9 {
                return Ok(vec![Property::fail(s, "oracle noise level", format!("distance {dist:e} for eta {eta:e}"))]);
            }
        }
    }
    let n = 3 * trials;
    Ok(vec![
        Property::check(s, "kept subspace is the top eigenspace", worst_top <= 1e-10, format!("{n} trials, max gap {worst_top:.1e}")),
        Property::check(s, "discarded weight at most 2 eta", worst_tail <= 2.0, format!("{n} trials, max ratio {worst_tail:.3}")),
        Property::check(s, "threshold leak at most 2 eta", worst_leak <= 2.0, format!("{n} trials, max ratio {worst_leak:.3}")),
    ])
}

struct Run {
    input: ComplexVector,
    circuit: CircuitDescription,
    report: LearnReport,
}

fn audited_runs(trials: usize, noisy: bool) -> Result<Vec<Run>, Error> {
    let n = 10;
    (0..trials as u64)
        .map(|seed| {
            let input = unit_mps(n, 2, 2, Boundary::Open, 1000 + seed)?;
            let mut params = LearnParams::new(2, 0.2, 0.1, Variant::Exact);
            params.audit = true;
            params.seed = seed;
            let mode = if noisy { OracleMode::noise(eta_exact(0.2, depth_for(n, 2)), 0x5eed + seed) } else { OracleMode::Exact };
            let (circuit, report) = learn(Backend::Pure(input.clone()), 2, &params, &mode)?;
            Ok(Run { input, circuit, report })
        })
        .collect()
}

/// Smallest eigenvalue of `rho^{j-1} - rho^j` over all layers, and whether
/// the trace ever grew.
fn layer_gaps(runs: &[Run]) -> Result<(f64, bool), Error> {
    let mut worst = f64::INFINITY;
    let mut grew = false;
    for run in runs {
        let audit = run.report.audit.as_ref();
        let mut prev = stepwise_state(&run.circuit, audit, 0)?;
        for j in 1..=run.circuit.depth() {
            let cur = stepwise_state(&run.circuit, audit, j)?;
            worst = worst.min(min_eig_difference(&prev, &cur)?);
            grew |= cur.mass() > prev.mass() + 1e-12;
            prev = cur;
        }
    }
    Ok((worst, grew))
}

fn monotonicity(trials: usize) -> SuiteResult {
    let s = Suite::Monotonicity;
    let (exact, _) = layer_gaps(&audited_runs(trials, false)?)?;
    let (noisy, grew) = layer_gaps(&audited_runs(trials, true)?)?;
    Ok(vec![
        Property::check(s, "exact oracle: successive states ordered", exact >= -1e-10, format!("min eigenvalue {exact:.3e}")),
        Property::check(s, "bounded noise: successive states ordered", noisy >= -1e-10, format!("min eigenvalue {noisy:.3e}")),
        Property::check(s, "trace nonincreasing", !grew, format!("{trials} noisy runs")),
    ])
}

fn layer_bounds(trials: usize) -> SuiteResult {
    let s = Suite::LayerBounds;
    let mut worst: f64 = 0.0;
    let mut min_fid = f64::INFINITY;
    for run in audited_runs(trials, true)? {
        let f = layer_fidelities(&run.circuit, run.report.audit.as_ref(), &run.input)?;
        for (j, layer) in run.report.per_layer.iter().enumerate() {
            worst = worst.max((f[j] - f[j + 1]).abs() / layer.fidelity_drop_bound);
        }
        min_fid = min_fid.min(run.report.final_fidelity);
    }
    Ok(vec![
        Property::check(s, "per-layer fidelity drop within bound", worst <= 1.0, format!("{trials} runs, max drop/bound {worst:.3e}")),
        Property::check(s, "final fidelity at least 1 - epsilon", min_fid >= 0.8, format!("min fidelity {min_fid:.6}")),
    ])
}

fn lambert(trials: usize) -> SuiteResult {
    let s = Suite::Lambert;
    let steps = trials.max(2);
    let ratio = 1e18f64.powf(1.0 / (steps - 1) as f64);
    let (mut z, mut residual, mut sandwich) = (1e-6f64, 0f64, true);
    for _ in 0..steps {
        let w = lambert_w(z)?;
        residual = residual.max(((w * w.exp() - z) / z).abs());
        if z > std::f64::consts::E {
            sandwich &= z.ln() - z.ln().ln() < w && w < z.ln();
        }
        z *= ratio;
    }
    let (mut width_ok, mut scan_ok, mut gaps) = (true, true, 0);
    for k in 0..steps {
        let d = 2 + k % 5;
        let b = 10f64.powf(-1.0 + 10.0 * k as f64 / (steps - 1) as f64);
        let sol = solve_for_b(b, d)?;
        width_ok &= sol.lower <= sol.upper && sol.upper - sol.lower < 1.0;
        let scan = (1..400).find(|&p| left_end(p, d) < b && b <= right_end(p, d));
        scan_ok &= scan == sol.exists.then_some(sol.p_candidate);
        gaps += usize::from(!sol.exists);
    }
    Ok(vec![
        Property::check(s, "w e^w = z", residual <= 1e-12, format!("{steps} points, max relative residual {residual:.1e}")),
        Property::check(s, "ln z - ln ln z < W(z) < ln z", sandwich, String::from("for z > e")),
        Property::check(s, "root interval narrower than one", width_ok, format!("{steps} values of B")),
        Property::check(s, "solver agrees with integer scan", scan_ok, format!("{gaps} of {steps} values without a solution")),
    ])
}

fn plan() -> SuiteResult {
    let s = Suite::Plan;
    let golden = plan_layers(29, 2, 2)?;
    let sizes: Vec<usize> = golden.layers.iter().map(|l| l.blocks.len()).collect();
    let fs: Vec<usize> = (1..=8).map(|i| golden.f(1, i)).collect();
    let first: Vec<usize> = golden.layer(1).blocks.iter().map(|b| b.support.len()).collect();
    let golden_ok = (golden.depth, golden.ell1, golden.s1, golden.k1) == (4, 7, 1, 27)
        && sizes == [8, 4, 2, 1]
        && fs == [2, 2, 2, 2, 2, 2, 1, 0]
        && first == [4, 4, 4, 4, 4, 4, 3, 2]
        && golden.final_sites() == [27, 28];
    let mut count = 0;
    let mut bad = None;
    for p in 1..=4 {
        for n in p + 1..=64 {
            let ok = plan_layers(n, 2, p).and_then(|pl| pl.check().map(|_| pl)).map(|pl| {
                pl.total_projected() == n - p && pl.final_sites().len() == p
            });
            if !matches!(ok, Ok(true)) && bad.is_none() {
                bad = Some(format!("n = {n}, p = {p}"));
            }
            count += 1;
        }
    }
    Ok(vec![
        Property::check(
            s,
            "n = 29, p = 2 golden plan",
            golden_ok,
            format!("M = {}, l1 = {}, s1 = {}, k1 = {}, blocks {sizes:?}", golden.depth, golden.ell1, golden.s1, golden.k1),
        ),
        Property::check(s, "plans partition and project n - p sites", bad.is_none(), bad.unwrap_or_else(|| format!("{count} plans"))),
    ])
}

fn dominance() -> SuiteResult {
    let s = Suite::Dominance;
    let mut min_ratio = f64::INFINITY;
    for n in [8usize, 16, 32, 64] {
        for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
            for d in [2usize, 3, 4] {
                for bond in [2usize, 3] {
                    let x = BudgetInputs::new(n, d, bond, eps, 0.1);
                    let p = solve_p_closest(n, d, bond, eps)?.p_candidate;
                    min_ratio = min_ratio.min(dominance_ratio(&x, p, eta_closest(eps, p, bond, n))?);
                }
            }
        }
    }
    let mut crossings = Vec::new();
    for (ours, previous) in [(Formula::ExactOurs, Formula::ExactPrevious), (Formula::ClosestOurs, Formula::ClosestPrevious)] {
        let at = |n: usize| -> Result<f64, Error> {
            let x = BudgetInputs::new(n, 2, 2, 0.1, 0.1);
            Ok(ours.evaluate(&x)? / previous.evaluate(&x)?)
        };
        let crossing = (4..=60).map(|k| 1usize << k).find(|&n| matches!(at(n), Ok(v) if v < 1.0));
        crossings.push((ours, crossing));
    }
    let cross_ok = crossings.iter().all(|(_, c)| c.is_some());
    let detail = crossings
        .iter()
        .map(|(f, c)| match c {
            Some(n) => format!("{f} below its predecessor from n = {n}"),
            None => format!("{f} never below its predecessor"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(vec![
        Property::check(s, "tree tomography dominates final tomography", min_ratio > 1.0, format!("min ratio {min_ratio:.2e}")),
        Property::check(s, "ours below previous at large n", cross_ok, detail),
    ])
}

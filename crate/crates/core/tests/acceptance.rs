//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use treemps_core::backend::Backend;
use treemps_core::complexity::{
    closest_form_ratio, dominance_ratio, epsilon_slope, eta_closest, eta_exact, n_slope, BudgetInputs, Formula,
};
use treemps_core::disentangler::{build_rank_capped, build_threshold};
use treemps_core::lambert::{lambert_w, left_end, right_end, select_epsilon, solve_for_b, solve_p_closest};
use treemps_core::learner::{
    extract_mps, extraction_bond_bound, layer_fidelities, learn, min_eig_difference, reconstruct_state,
    residual_projection, stepwise_state, LearnParams, LearnReport, Variant,
};
use treemps_core::linalg::{numerical_rank, partial_trace, operator_norm, trace_norm, ComplexMatrix, ComplexVector, C64};
use treemps_core::mps::{block_rdm, random_mps, Boundary, StateRef, StateSpec};
use treemps_core::plan::{depth_for, plan_layers};
use treemps_core::rng;
use treemps_core::tomography::{estimate_from_block_state, OracleMode};
use treemps_core::learner::CircuitDescription;

type Outcome = Result<String, String>;

fn unit_mps(n: usize, d: usize, bond: usize, boundary: Boundary, seed: u64) -> ComplexVector {
    let spec = StateSpec { boundary, ..StateSpec::random(n, d, bond, seed) };
    let mut m = random_mps(&spec).expect("valid spec");
    m.normalize().expect("nonzero state");
    m.expand().expect("small state")
}

struct Run {
    input: ComplexVector,
    circuit: CircuitDescription,
    report: LearnReport,
}

fn exact_runs(mode_for: impl Fn(u64) -> OracleMode, epsilon: f64) -> Result<Vec<Run>, String> {
    (0..20u64)
        .map(|seed| {
            let input = unit_mps(12, 2, 2, Boundary::Open, 1000 + seed);
            let mut params = LearnParams::new(2, epsilon, 0.1, Variant::Exact);
            params.audit = true;
            params.seed = seed;
            let (circuit, report) =
                learn(Backend::Pure(input.clone()), 2, &params, &mode_for(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
            Ok(Run { input, circuit, report })
        })
        .collect()
}

fn criterion_1(runs: &[Run]) -> Outcome {
    let worst = runs.iter().map(|r| r.report.final_fidelity).fold(f64::INFINITY, f64::min);
    let detail = format!("20 seeds, min fidelity {worst:.15}");
    if worst >= 1.0 - 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2(runs: &[Run]) -> Outcome {
    let worst = runs.iter().map(|r| r.report.final_fidelity).fold(f64::INFINITY, f64::min);
    let eta = runs[0].report.eta;
    let detail = format!("eta {eta:.3e}, min fidelity {worst:.6}");
    if worst >= 0.8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Rank of the block state, computed on whichever side of the cut is smaller
/// (a pure state has the same nonzero spectrum on both).
fn block_rank(rho: &ComplexMatrix, n: usize, block: &[usize]) -> Result<usize, String> {
    let rest: Vec<usize> = (0..n).filter(|s| !block.contains(s)).collect();
    if rest.is_empty() {
        return Ok(1);
    }
    let keep = if block.len() <= rest.len() { block } else { &rest[..] };
    let reduced = partial_trace(rho, &vec![2; n], keep).map_err(|e| e.to_string())?;
    numerical_rank(&reduced, 1e-10).map_err(|e| e.to_string())
}

fn criterion_3() -> Outcome {
    let mut r = rng::seeded(77);
    let mut checked = 0usize;
    let mut worst_excess = 0isize;
    for trial in 0..100u64 {
        let n = r.random_range(4..=10usize);
        let bond = if trial % 2 == 0 { 2 } else { 3 };
        let boundary = if trial % 4 < 2 { Boundary::Open } else { Boundary::Periodic };
        let psi = unit_mps(n, 2, bond, boundary, trial);
        let dims = vec![2; n];
        let rho = psi.projector();
        for start in 0..n {
            for end in start + 1..=n {
                let block: Vec<usize> = (start..end).collect();
                let rank = block_rank(&rho, n, &block)?;
                worst_excess = worst_excess.max(rank as isize - (bond * bond) as isize);
                checked += 1;
                if rank > bond * bond {
                    return Err(format!("trial {trial}: block {start}..{end} has rank {rank} > {}", bond * bond));
                }
            }
        }
        // local unitaries on the block and its complement leave the rank alone
        if n >= 4 {
            let u_in = rng::random_unitary(&mut r, 4);
            let u_out = rng::random_unitary(&mut r, 2);
            let mut moved = treemps_core::backend::apply_to_vector(&psi, 2, n, &u_in, 1, 2).map_err(|e| e.to_string())?;
            moved = treemps_core::backend::apply_to_vector(&moved, 2, n, &u_out, 0, 1).map_err(|e| e.to_string())?;
            let a = block_rdm(StateRef::Pure(&psi), &dims, &[1, 2]).map_err(|e| e.to_string())?;
            let b = block_rdm(StateRef::Pure(&moved), &dims, &[1, 2]).map_err(|e| e.to_string())?;
            let (ra, rb) = (numerical_rank(&a, 1e-10).unwrap(), numerical_rank(&b, 1e-10).unwrap());
            if ra != rb {
                return Err(format!("trial {trial}: rank changed {ra} -> {rb} under local unitaries"));
            }
        }
    }
    Ok(format!("{checked} block states, max rank - D^2 = {worst_excess}"))
}

fn criterion_4() -> Outcome {
    let mut r = rng::seeded(4);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_threshold: f64 = 0.0;
    for (k, &eta) in [1e-1, 1e-2, 1e-3].iter().enumerate() {
        for trial in 0..200u64 {
            let (bond, dim) = if trial % 2 == 0 { (2, 16) } else { (3, 27) };
            let d = if dim == 16 { 2 } else { 3 };
            let p = 2;
            let rank = 1 + (trial as usize % (bond * bond));
            let sigma = rng::random_density_matrix(&mut r, dim, rank);
            let mode = OracleMode::noise(eta, trial * 7 + k as u64);
            let hat = estimate_from_block_state(&sigma, &vec![d; if d == 2 { 4 } else { 3 }], &mode)
                .map_err(|e| e.to_string())?
                .estimate;
            let dist = trace_norm(&(&hat - &sigma)).map_err(|e| e.to_string())?;
            if (dist - eta).abs() > 1e-9 * eta.max(1.0) {
                return Err(format!("noise {dist:e} is not exactly {eta:e}"));
            }
            let u = build_rank_capped(&hat, d, bond * bond, p, trial).map_err(|e| e.to_string())?;
            let tail = (&ComplexMatrix::identity(dim) - &u.selected_projector()).matmul(&sigma).trace().re;
            worst_ratio = worst_ratio.max(tail / eta);
            if tail > 2.0 * eta + 1e-12 {
                return Err(format!("eta {eta:e}, trial {trial}: discarded {tail:e} > 2 eta"));
            }

            // threshold construction with operator-norm noise
            let mut delta = rng::random_hermitian(&mut r, dim);
            let shift = delta.trace() / dim as f64;
            for i in 0..dim {
                delta[(i, i)] -= shift;
            }
            let size = operator_norm(&delta).map_err(|e| e.to_string())?;
            delta.scale_mut(C64::new(eta / size, 0.0));
            let noisy = &sigma + &delta;
            let t = build_threshold(&noisy, d, eta, trial).map_err(|e| e.to_string())?;
            let comp = &ComplexMatrix::identity(dim) - &t.selected_projector();
            let off = operator_norm(&comp.matmul(&sigma).matmul(&comp)).map_err(|e| e.to_string())?;
            worst_threshold = worst_threshold.max(off / eta);
            if off > 2.0 * eta + 1e-12 {
                return Err(format!("eta {eta:e}, trial {trial}: threshold leak {off:e} > 2 eta"));
            }
        }
    }
    Ok(format!("600 trials each, max discarded/eta {worst_ratio:.3}, max leak/eta {worst_threshold:.3}"))
}

fn criterion_5(exact: &[Run], noisy: &[Run]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    let mut exact_worst = f64::INFINITY;
    let mut trace_grew = false;
    for (label, runs) in [("exact", exact), ("noise", noisy)] {
        for (seed, run) in runs.iter().enumerate() {
            let audit = run.report.audit.as_ref();
            let mut prev = stepwise_state(&run.circuit, audit, 0).map_err(|e| e.to_string())?;
            for j in 1..=run.circuit.depth() {
                let cur = stepwise_state(&run.circuit, audit, j).map_err(|e| e.to_string())?;
                let m = min_eig_difference(&prev, &cur).map_err(|e| e.to_string())?;
                if cur.mass() > prev.mass() + 1e-12 {
                    trace_grew = true;
                }
                if label == "exact" {
                    exact_worst = exact_worst.min(m);
                }
                if m < worst {
                    worst = m;
                    worst_at = format!("{label} seed {seed} layer {j}");
                }
                prev = cur;
            }
        }
    }
    let detail = format!(
        "min eig exact runs {exact_worst:.3e}; overall {worst:.3e} at {worst_at}; trace nonincreasing: {}",
        !trace_grew
    );
    if worst >= -1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6(noisy: &[Run]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (seed, run) in noisy.iter().enumerate() {
        let f = layer_fidelities(&run.circuit, run.report.audit.as_ref(), &run.input).map_err(|e| e.to_string())?;
        for (j, layer) in run.report.per_layer.iter().enumerate() {
            let drop = (f[j] - f[j + 1]).abs();
            let expected = 2.0 * (2.0 * run.report.eta * 2f64.powi((run.circuit.depth() - layer.j) as i32)).sqrt();
            if (expected - layer.fidelity_drop_bound).abs() > 1e-15 {
                return Err(format!("seed {seed} layer {}: reported bound disagrees", layer.j));
            }
            worst = worst.max(drop / layer.fidelity_drop_bound);
            if drop > layer.fidelity_drop_bound {
                return Err(format!("seed {seed} layer {}: drop {drop:e} > {:e}", layer.j, layer.fidelity_drop_bound));
            }
        }
    }
    Ok(format!("20 seeds, max drop/bound {worst:.3e}"))
}

fn criterion_7() -> Outcome {
    let plan = plan_layers(29, 2, 2).map_err(|e| e.to_string())?;
    if (plan.depth, plan.ell1, plan.s1, plan.k1) != (4, 7, 1, 27) {
        return Err(format!("got M={}, l1={}, s1={}, k1={}", plan.depth, plan.ell1, plan.s1, plan.k1));
    }
    let one = |v: &[usize]| v.iter().map(|s| s + 1).collect::<Vec<_>>();
    let first = plan.layer(1);
    let mut expected: Vec<Vec<usize>> = (0..6).map(|i| (4 * i + 1..=4 * i + 4).collect()).collect();
    expected.push(vec![25, 26, 27]);
    expected.push(vec![28, 29]);
    let got: Vec<Vec<usize>> = first.blocks.iter().map(|b| one(&b.support)).collect();
    if got != expected {
        return Err(format!("first layer {got:?}"));
    }
    let fs: Vec<usize> = (1..=8).map(|i| plan.f(1, i)).collect();
    if fs != [2, 2, 2, 2, 2, 2, 1, 0] {
        return Err(format!("f(1, .) = {fs:?}"));
    }
    let sizes: Vec<usize> = plan.layers.iter().map(|l| l.blocks.len()).collect();
    if sizes != [8, 4, 2, 1] || one(&plan.final_sites()) != [28, 29] {
        return Err(format!("layer sizes {sizes:?}"));
    }
    let mut count = 0;
    for p in 1..=4 {
        for n in 3..=64 {
            if n <= p {
                continue;
            }
            let plan = plan_layers(n, 2, p).map_err(|e| format!("n={n}, p={p}: {e}"))?;
            plan.check().map_err(|e| format!("n={n}, p={p}: {e}"))?;
            let first: Vec<usize> = plan.layer(1).blocks.iter().flat_map(|b| b.support.clone()).collect();
            if first != (0..n).collect::<Vec<_>>() || plan.total_projected() != n - p || plan.final_sites().len() != p {
                return Err(format!("n={n}, p={p}: invariants fail"));
            }
            count += 1;
        }
    }
    Ok(format!("golden plan exact, {count} sweep plans valid"))
}

fn brute(b: f64, d: usize) -> Option<usize> {
    (1..400).find(|&p| left_end(p, d) < b && b <= right_end(p, d))
}

fn criterion_8() -> Outcome {
    let mut z: f64 = 1e-6;
    let ratio = (1e18f64).powf(1.0 / 999.0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = lambert_w(z).map_err(|e| e.to_string())?;
        let rel = ((w * w.exp() - z) / z).abs();
        worst = worst.max(rel);
        if rel > 1e-12 {
            return Err(format!("w e^w misses z = {z:e} by {rel:e}"));
        }
        if z > std::f64::consts::E && !(z.ln() - z.ln().ln() < w && w < z.ln()) {
            return Err(format!("sandwich fails at z = {z:e}"));
        }
        z *= ratio;
    }
    let mut r = rng::seeded(8);
    for k in 0..1000 {
        let d = 2 + k % 5;
        let b = 10f64.powf(-2.0 + 14.0 * k as f64 / 999.0);
        let s = solve_for_b(b, d).map_err(|e| e.to_string())?;
        if !(s.lower <= s.upper && s.upper - s.lower < 1.0) {
            return Err(format!("b - a = {} at B = {b:e}, d = {d}", s.upper - s.lower));
        }
    }
    let mut gaps = 0;
    for _ in 0..1000 {
        let d = r.random_range(2..=6usize);
        let b = 10f64.powf(r.random_range(-1.0..9.0));
        let s = solve_for_b(b, d).map_err(|e| e.to_string())?;
        let scan = brute(b, d);
        let solver = s.exists.then_some(s.p_candidate);
        if scan != solver {
            return Err(format!("B = {b:e}, d = {d}: scan {scan:?}, solver {solver:?}"));
        }
        gaps += usize::from(!s.exists);
    }
    for d in [2usize, 3, 4] {
        for m in 1..=12usize {
            let b = m as f64 * (d as f64).powi(m as i32);
            let s = solve_for_b(b, d).map_err(|e| e.to_string())?;
            if s.p_candidate != m || !s.exists {
                return Err(format!("B = m d^m with m = {m}, d = {d} gave p = {}", s.p_candidate));
            }
        }
    }
    Ok(format!("max relative residual {worst:.1e}, {gaps} of 1000 random B without solution, all match the scan"))
}

fn criterion_9() -> Outcome {
    let (n, bond, lambda) = (8usize, 2usize, 0.1);
    let (m, eps) = select_epsilon(n, 2, bond, 0.5).map_err(|e| e.to_string())?;
    let floor = (1.0 - lambda) + lambda / 256.0 - eps;
    let mut worst = f64::INFINITY;
    let mut trivial = 0;
    for seed in 0..10u64 {
        let phi = unit_mps(n, 2, bond, Boundary::Open, 500 + seed);
        let mut rho = phi.projector().scaled(C64::new(1.0 - lambda, 0.0));
        for k in 0..256 {
            rho[(k, k)] += C64::new(lambda / 256.0, 0.0);
        }
        let mut params = LearnParams::new(bond, eps, 0.1, Variant::Closest);
        params.seed = seed;
        let (c, report) = learn(Backend::Mixed(rho), 2, &params, &OracleMode::Exact).map_err(|e| e.to_string())?;
        trivial += usize::from(c.is_trivial());
        worst = worst.min(report.final_fidelity);
        if report.final_fidelity < floor {
            return Err(format!("seed {seed}: fidelity {} < {floor}", report.final_fidelity));
        }
    }
    Ok(format!("m = {m}, eps' = {eps:.4}, floor {floor:.4}, min fidelity {worst:.6}, {trivial}/10 on the n <= 2p path"))
}

fn criterion_10() -> Outcome {
    let base = BudgetInputs::new(64, 2, 2, 0.1, 0.1);
    let ns: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
    let mut lines = Vec::new();
    for (f, want, tol, strip) in [
        (Formula::ExactOurs, 3.0, 0.05, true),
        (Formula::ExactPrevious, 5.0, 0.05, true),
        (Formula::ClosestPrevious, 9.0, 0.05, true),
        (Formula::ClosestOurs, 7.0, 0.5, false),
    ] {
        let s = n_slope(f, &base, &ns, strip).map_err(|e| e.to_string())?;
        if (s - want).abs() > tol {
            return Err(format!("{f}: n-slope {s}"));
        }
        lines.push(format!("{f} n^{s:.3}"));
    }
    let coarse = [0.4, 0.2, 0.1, 0.05, 0.025];
    for (f, want) in [(Formula::ExactOurs, 4.0), (Formula::ExactPrevious, 4.0), (Formula::ClosestPrevious, 8.0)] {
        let s = epsilon_slope(f, &base, &coarse).map_err(|e| e.to_string())?;
        if (s - want).abs() > 0.05 {
            return Err(format!("{f}: eps-slope {s}"));
        }
    }
    let fine = [1e-6, 3e-6, 1e-5, 3e-5, 1e-4];
    let e12 = epsilon_slope(Formula::ClosestOurs, &base, &fine).map_err(|e| e.to_string())?;
    if !(11.5..=12.0).contains(&e12) {
        return Err(format!("closest_ours eps-slope {e12}"));
    }
    lines.push(format!("closest_ours eps^-{e12:.3}"));

    let mut min_dom = f64::INFINITY;
    for n in [8usize, 16, 32, 64] {
        for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
            for d in [2usize, 3, 4] {
                for bond in [2usize, 3] {
                    let x = BudgetInputs::new(n, d, bond, eps, 0.1);
                    let p = solve_p_closest(n, d, bond, eps).map_err(|e| e.to_string())?.p_candidate;
                    let r = dominance_ratio(&x, p, eta_closest(eps, p, bond, n)).map_err(|e| e.to_string())?;
                    min_dom = min_dom.min(r);
                    if r <= 1.0 {
                        return Err(format!("dominance ratio {r} at n={n}, eps={eps}, d={d}, D={bond}"));
                    }
                }
            }
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for n in [8usize, 16, 32, 64, 128] {
        for eps in [0.05, 0.1, 0.2, 0.5] {
            for d in [2usize, 3] {
                for bond in [2usize, 3] {
                    let r = closest_form_ratio(&BudgetInputs::new(n, d, bond, eps, 0.1)).map_err(|e| e.to_string())?;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
    }
    let detail = format!("{}; dominance min {min_dom:.2e}; raw/closed in [{lo:.3}, {hi:.3}]", lines.join(", "));
    if lo >= 0.125 && hi <= 8.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_11() -> Outcome {
    let mut worst_round: f64 = 0.0;
    let mut worst_fid: f64 = 0.0;
    let mut max_bond = 0;
    for seed in 0..5u64 {
        let psi = unit_mps(8, 2, 2, Boundary::Open, 900 + seed);
        let mut params = LearnParams::new(2, 0.2, 0.1, Variant::Exact);
        params.seed = seed;
        let mode = OracleMode::noise(0.2, seed);
        let (c, _) = learn(Backend::Pure(psi), 2, &params, &mode).map_err(|e| e.to_string())?;
        let phi = reconstruct_state(&c).map_err(|e| e.to_string())?;
        let sector = residual_projection(&c, &phi, c.depth()).map_err(|e| e.to_string())?;
        // everything outside the sector is lost weight
        let round = sector.max_abs_diff(&c.residual).max((1.0 - sector.norm_sqr()).abs());
        worst_round = worst_round.max(round);
        let m = extract_mps(&c).map_err(|e| e.to_string())?;
        let v = m.expand().map_err(|e| e.to_string())?;
        worst_fid = worst_fid.max(1.0 - v.inner(&phi).norm_sqr());
        let bound = extraction_bond_bound(2, 2, depth_for(8, 2));
        max_bond = max_bond.max(m.max_bond());
        if m.max_bond() > bound {
            return Err(format!("bond {} > {bound}", m.max_bond()));
        }
    }
    let detail = format!("round trip {worst_round:.1e}, 1 - fidelity {worst_fid:.1e}, max bond {max_bond}");
    if worst_round <= 1e-10 && worst_fid <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn report(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let took = start.elapsed();
    let (tag, detail, ok) = match outcome {
        Ok(d) if took <= limit => ("PASS", d, true),
        Ok(d) => ("FAIL", format!("{d} (took {took:.1?} > {limit:?})"), false),
        Err(d) => ("FAIL", d, false),
    };
    println!("[{id:02}] {tag} {name}: {detail} [{took:.2?}]");
    ok
}

fn main() -> ExitCode {
    let mut ok = true;
    let exact_start = Instant::now();
    let exact = exact_runs(|_| OracleMode::Exact, 0.2);
    let exact_time = exact_start.elapsed();
    let noise_start = Instant::now();
    let noisy = exact_runs(
        |seed| OracleMode::noise(eta_exact(0.2, depth_for(12, 2)), 0x5eed + seed),
        0.2,
    );
    let noise_time = noise_start.elapsed();
    let (exact, noisy) = match (exact, noisy) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            println!("learner runs failed: {:?} {:?}", a.err(), b.err());
            return ExitCode::FAILURE;
        }
    };
    ok &= report(1, "exact recovery", Duration::from_secs(60), || {
        criterion_1(&exact).map(|d| format!("{d}, learning took {exact_time:.2?}"))
    });
    ok &= report(2, "bounded-noise guarantee", Duration::from_secs(300), || {
        criterion_2(&noisy).map(|d| format!("{d}, learning took {noise_time:.2?}"))
    });
    ok &= report(3, "block rank bound", Duration::from_secs(120), criterion_3);
    ok &= report(4, "top-subspace truncation", Duration::from_secs(120), criterion_4);
    ok &= report(5, "step-wise monotonicity", Duration::from_secs(120), || criterion_5(&exact, &noisy));
    ok &= report(6, "per-layer fidelity loss", Duration::from_secs(120), || criterion_6(&noisy));
    ok &= report(7, "layer plan", Duration::from_secs(10), criterion_7);
    ok &= report(8, "Lambert W and block-size equation", Duration::from_secs(30), criterion_8);
    ok &= report(9, "closest-state guarantee", Duration::from_secs(600), criterion_9);
    ok &= report(10, "budget laws", Duration::from_secs(10), criterion_10);
    ok &= report(11, "reconstruction and extraction", Duration::from_secs(120), criterion_11);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

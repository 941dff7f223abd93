//! Lambert W and the self-consistent block-size equation
//! `p d^{p-1} < B <= p d^p`.

use crate::error::{Error, Result};

/// Relative slack on `B <= p d^p`, so that `B` rebuilt in floating point from
/// an integral `m d^m` still lands on `p = m`.
pub const RELATIVE_SLACK: f64 = 1e-12;

/// `(sqrt 2 - 1)^2`.
pub const GAP_SQ: f64 = 0.171_572_875_253_809_9;

/// Principal branch of Lambert W on `z >= 0`.
pub fn lambert_w(z: f64) -> Result<f64> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::NegativeArgument(z));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if z > core::f64::consts::E {
        // Newton on w + ln w = ln z, well conditioned for large z
        let lz = libm::log(z);
        let mut w = lz - libm::log(lz);
        for _ in 0..100 {
            let step = (w + libm::log(w) - lz) / (1.0 + 1.0 / w);
            w -= step;
            if step.abs() <= 1e-16 * w {
                break;
            }
        }
        return Ok(w);
    }
    // Halley on w e^w - z
    let mut w = libm::log1p(z) * 0.75;
    for _ in 0..100 {
        let ew = libm::exp(w);
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-16 * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambertSolution {
    pub b: f64,
    /// `B ln d`.
    pub z: f64,
    /// Real root of `x d^x = B`.
    pub lower: f64,
    /// Real root of `x d^{x-1} = B`.
    pub upper: f64,
    pub p_candidate: usize,
    pub exists: bool,
}

/// `64 n D^2 / (sqrt 2 - 1)^2`, the numerator shared by `B` and `epsilon'`.
pub fn closest_scale(n: usize, bond: usize) -> f64 {
    64.0 * n as f64 * (bond * bond) as f64 / GAP_SQ
}

/// Solves `p d^{p-1} < B <= p d^p` for an arbitrary `B > 0`.
pub fn solve_for_b(b: f64, d: usize) -> Result<LambertSolution> {
    if d < 2 {
        return Err(Error::BadParameter(alloc::format!("local dimension {d} < 2")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::BadParameter(alloc::format!("B = {b} must be positive")));
    }
    let ln_d = libm::log(d as f64);
    let z = b * ln_d;
    let lower = lambert_w(z)? / ln_d;
    let upper = lambert_w(z * d as f64)? / ln_d;
    // ceil(lower) is the least integer with p d^p >= B; the float root is
    // only a starting point and the exact inequality decides
    let mut p = (libm::ceil(lower).max(1.0)) as usize;
    while p > 1 && covers(p - 1, d, b) {
        p -= 1;
    }
    while !covers(p, d, b) {
        p += 1;
    }
    let exists = left_end(p, d) < b;
    Ok(LambertSolution { b, z, lower, upper, p_candidate: p, exists })
}

fn covers(p: usize, d: usize, b: f64) -> bool {
    right_end(p, d) >= b * (1.0 - RELATIVE_SLACK)
}

/// Left end `p d^{p-1}` of the interval `I_p`.
pub fn left_end(p: usize, d: usize) -> f64 {
    p as f64 * libm::pow(d as f64, p as f64 - 1.0)
}

/// Right end `p d^p` of the interval `I_p`.
pub fn right_end(p: usize, d: usize) -> f64 {
    p as f64 * libm::pow(d as f64, p as f64)
}

/// Block size for the closest-state learner from
/// `B = 64 n D^2 / ((sqrt 2 - 1)^2 epsilon^2)`.
pub fn solve_p_closest(n: usize, d: usize, bond: usize, epsilon: f64) -> Result<LambertSolution> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    solve_for_b(closest_scale(n, bond) / (epsilon * epsilon), d)
}

/// Smallest `m` with `m d^m >= B(target)` and the matching
/// `epsilon' = sqrt(64 n D^2 / ((sqrt 2 - 1)^2 m d^m)) <= target`.
pub fn select_epsilon(n: usize, d: usize, bond: usize, target: f64) -> Result<(usize, f64)> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::BadEpsilon(target));
    }
    if d < 2 {
        return Err(Error::BadParameter(alloc::format!("local dimension {d} < 2")));
    }
    let scale = closest_scale(n, bond);
    let b = scale / (target * target);
    // relative slack so that a target already of the form m d^m maps to m
    let mut m = 1;
    while !covers(m, d, b) {
        m += 1;
    }
    let eps = libm::sqrt(scale / right_end(m, d)).min(target);
    Ok((m, eps))
}

//! Closed-form sample-complexity evaluators.
//!
//! Every formula returns an unrounded real with all asymptotic constants set
//! to `constant` (1 by default), so that scaling laws can be fitted exactly.
//! Logarithms are natural.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::lambert::{closest_scale, solve_p_closest, GAP_SQ};

/// Per-call accuracy of the exact learner: `(sqrt 2 - 1)^2 eps^2 / 2^{M+5}`.
pub fn eta_exact(epsilon: f64, depth: usize) -> f64 {
    GAP_SQ * epsilon * epsilon / libm::pow(2.0, depth as f64 + 5.0)
}

/// Per-call threshold of the closest learner: `(sqrt 2 - 1)^2 eps^2 p / (64 D^2 n)`.
pub fn eta_closest(epsilon: f64, p: usize, bond: usize, n: usize) -> f64 {
    GAP_SQ * epsilon * epsilon * p as f64 / (64.0 * (bond * bond) as f64 * n as f64)
}

/// `(sqrt 2 - 1)^2 / 64`.
pub const C1: f64 = GAP_SQ / 64.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetInputs {
    pub n: usize,
    pub d: usize,
    pub bond: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub constant: f64,
}

impl BudgetInputs {
    pub fn new(n: usize, d: usize, bond: usize, epsilon: f64, delta: f64) -> Self {
        BudgetInputs { n, d, bond, epsilon, delta, constant: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d < 2 || self.bond == 0 {
            return Err(Error::BadParameter(format!(
                "n = {}, d = {}, D = {}",
                self.n, self.d, self.bond
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::BadParameter(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadParameter(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.constant > 0.0 && self.constant.is_finite()) {
            return Err(Error::BadParameter(format!("constant {} must be positive", self.constant)));
        }
        Ok(())
    }

    /// `ln(n / delta)`.
    pub fn log_factor(&self) -> f64 {
        libm::log(self.n as f64 / self.delta)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn df(&self) -> f64 {
        self.d as f64
    }

    fn bf(&self) -> f64 {
        self.bond as f64
    }
}

/// `D^6 d^2 n^3 log(n/delta) / ((log_d D)^3 eps^4)`.
pub fn budget_exact_ours(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    if x.bond < 2 {
        return Err(Error::DegenerateD(x.bond));
    }
    let log_d_bond = libm::log(x.bf()) / libm::log(x.df());
    Ok(x.constant * libm::pow(x.bf(), 6.0) * x.df() * x.df() * libm::pow(x.nf(), 3.0) * x.log_factor()
        / (libm::pow(log_d_bond, 3.0) * libm::pow(x.epsilon, 4.0)))
}

/// `n^5 D^2 log(n/delta) / eps^4`.
pub fn budget_exact_previous(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    Ok(x.constant * libm::pow(x.nf(), 5.0) * x.bf() * x.bf() * x.log_factor() / libm::pow(x.epsilon, 4.0))
}

/// `L = ln(ln d * 64 n D^2 / ((sqrt 2 - 1)^2 eps^2))`.
pub fn closest_log(x: &BudgetInputs) -> f64 {
    libm::log(libm::log(x.df()) * closest_scale(x.n, x.bond) / (x.epsilon * x.epsilon))
}

/// `D^12 n^7 d^4 (ln d)^7 log(n/delta) / (eps^12 L^7)`.
pub fn budget_closest_ours(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    let l = closest_log(x);
    if !(l > 0.0) {
        return Err(Error::BadParameter(format!("L = {l} is not positive")));
    }
    let ln_d = libm::log(x.df());
    Ok(x.constant
        * libm::pow(x.bf(), 12.0)
        * libm::pow(x.nf(), 7.0)
        * libm::pow(x.df(), 4.0)
        * libm::pow(ln_d, 7.0)
        * x.log_factor()
        / (libm::pow(x.epsilon, 12.0) * libm::pow(l, 7.0)))
}

/// `n^9 D^8 log(n/delta) / eps^8`.
pub fn budget_closest_previous(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    Ok(x.constant * libm::pow(x.nf(), 9.0) * libm::pow(x.bf(), 8.0) * x.log_factor() / libm::pow(x.epsilon, 8.0))
}

/// The alternative accounting with random-Clifford tomography:
/// `d^3 n^10 D^10 log(n/delta) / eps^10`.
pub fn budget_closest_previous_clifford(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    Ok(x.constant * libm::pow(x.df(), 3.0) * libm::pow(x.nf(), 10.0) * libm::pow(x.bf(), 10.0) * x.log_factor()
        / libm::pow(x.epsilon, 10.0))
}

/// Final residual tomography: `d^{2p} log(n/delta) / eps^2`.
pub fn final_tomo_budget(x: &BudgetInputs, p: usize) -> Result<f64> {
    x.validate()?;
    if p == 0 {
        return Err(Error::BadParameter(format!("block size {p}")));
    }
    Ok(x.constant * libm::pow(x.df(), 2.0 * p as f64) * x.log_factor() / (x.epsilon * x.epsilon))
}

/// Tree tomography total before eliminating `p`: `n d^{4p} log(n/delta) / (p eta^2)`.
pub fn tree_budget(x: &BudgetInputs, p: usize, eta: f64) -> Result<f64> {
    x.validate()?;
    if p == 0 || !(eta > 0.0) {
        return Err(Error::BadParameter(format!("p = {p}, eta = {eta}")));
    }
    Ok(x.constant * x.nf() * libm::pow(x.df(), 4.0 * p as f64) * x.log_factor() / (p as f64 * eta * eta))
}

/// `N / K = n eps^2 d^{2p} / (p eta^2)`.
pub fn dominance_ratio(x: &BudgetInputs, p: usize, eta: f64) -> Result<f64> {
    Ok(tree_budget(x, p, eta)? / final_tomo_budget(x, p)?)
}

/// Budget after `d^p < d / eta`: `n d^4 log(n/delta) / (p eta^6)` with
/// `p` and `eta` taken from the closest learner's own formulas.
pub fn raw_closest_budget(x: &BudgetInputs) -> Result<f64> {
    x.validate()?;
    let p = solve_p_closest(x.n, x.d, x.bond, x.epsilon)?.p_candidate;
    let eta = eta_closest(x.epsilon, p, x.bond, x.n);
    Ok(x.constant * x.nf() * libm::pow(x.df(), 4.0) * x.log_factor() / (p as f64 * libm::pow(eta, 6.0)))
}

/// Raw over closed-form budget with the `c_1^{-6}` from expanding `eta`
/// restored; only the `Theta` from eliminating `p` remains, which equals
/// `(L / (p ln d))^7`.
pub fn closest_form_ratio(x: &BudgetInputs) -> Result<f64> {
    Ok(raw_closest_budget(x)? * libm::pow(C1, 6.0) / budget_closest_ours(x)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formula {
    ExactOurs,
    ExactPrevious,
    ClosestOurs,
    ClosestPrevious,
    ClosestPreviousClifford,
}

impl Formula {
    pub const ALL: [Formula; 5] = [
        Formula::ExactOurs,
        Formula::ExactPrevious,
        Formula::ClosestOurs,
        Formula::ClosestPrevious,
        Formula::ClosestPreviousClifford,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formula::ExactOurs => "exact_ours",
            Formula::ExactPrevious => "exact_previous",
            Formula::ClosestOurs => "closest_ours",
            Formula::ClosestPrevious => "closest_previous",
            Formula::ClosestPreviousClifford => "closest_previous_clifford",
        }
    }

    pub fn evaluate(self, x: &BudgetInputs) -> Result<f64> {
        match self {
            Formula::ExactOurs => budget_exact_ours(x),
            Formula::ExactPrevious => budget_exact_previous(x),
            Formula::ClosestOurs => budget_closest_ours(x),
            Formula::ClosestPrevious => budget_closest_previous(x),
            Formula::ClosestPreviousClifford => budget_closest_previous_clifford(x),
        }
    }

    /// Nominal exponents of `n` and `1/eps`.
    pub fn exponents(self) -> (f64, f64) {
        match self {
            Formula::ExactOurs => (3.0, 4.0),
            Formula::ExactPrevious => (5.0, 4.0),
            Formula::ClosestOurs => (7.0, 12.0),
            Formula::ClosestPrevious => (9.0, 8.0),
            Formula::ClosestPreviousClifford => (10.0, 10.0),
        }
    }

    /// Whether the formula carries the slowly varying `L^{-7}` factor.
    pub fn has_log_correction(self) -> bool {
        self == Formula::ClosestOurs
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::BadParameter(format!("unknown formula `{s}`")))
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::BadParameter(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::BadParameter(alloc::string::String::from("log-log fit needs positive finite data")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| libm::log(*v)).collect();
    let ly: Vec<f64> = ys.iter().map(|v| libm::log(*v)).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::BadParameter(alloc::string::String::from("x values are all equal")));
    }
    Ok(sxy / sxx)
}

/// Fitted `n`-exponent over `ns`. With `strip_log` the `ln(n/delta)` factor
/// is divided out first, leaving the polynomial part.
pub fn n_slope(formula: Formula, base: &BudgetInputs, ns: &[usize], strip_log: bool) -> Result<f64> {
    let mut xs = Vec::with_capacity(ns.len());
    let mut ys = Vec::with_capacity(ns.len());
    for &n in ns {
        let x = BudgetInputs { n, ..*base };
        let mut v = formula.evaluate(&x)?;
        if strip_log {
            v /= x.log_factor();
        }
        xs.push(n as f64);
        ys.push(v);
    }
    loglog_slope(&xs, &ys)
}

/// Fitted exponent of `1/eps` over `epsilons`.
pub fn epsilon_slope(formula: Formula, base: &BudgetInputs, epsilons: &[f64]) -> Result<f64> {
    let mut xs = Vec::with_capacity(epsilons.len());
    let mut ys = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        xs.push(1.0 / epsilon);
        ys.push(formula.evaluate(&BudgetInputs { epsilon, ..*base })?);
    }
    loglog_slope(&xs, &ys)
}

//! Regret accounting and closed-form regret bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{QueryRecord, RunTrace};
use crate::proxies::{pow, ObjectiveClass, ProxyError};

/// Absolute slack allowed when comparing a regret to its bound.
pub const BOUND_TOL: f64 = 1e-8;
/// How far `f*` may sit above the best observed value before it is rejected.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegretError {
    #[error("f* = {f_star} exceeds the observed value {observed} (t = {t})")]
    InvalidOracle { f_star: f64, observed: f64, t: usize },
    #[error("empty trace")]
    EmptyTrace,
    #[error("horizon T must be at least 2, got {0}")]
    InvalidHorizon(usize),
    #[error("diameter must be finite and positive, got {0}")]
    InvalidDiameter(f64),
    #[error("certificate needs x_l < x_m < x_r, got ({0}, {1}, {2})")]
    InvalidGeometry(f64, f64, f64),
    #[error("trace has no objective class")]
    MissingClass,
    #[error(transparent)]
    Proxy(#[from] ProxyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FStarSource {
    Known,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    #[serde(rename = "T")]
    pub t: usize,
    pub cumulative_regret: f64,
    pub simple_regret: f64,
    pub certificate_sum: f64,
    pub theoretical_bound: f64,
    pub bound_satisfied: bool,
    pub f_star: f64,
    pub f_star_source: FStarSource,
}

fn check_oracle(records: &[QueryRecord], f_star: f64) -> Result<(), RegretError> {
    let tol = ORACLE_TOL * (1.0 + f_star.abs());
    match records.iter().find(|r| f_star > r.fx + tol) {
        Some(r) => Err(RegretError::InvalidOracle {
            f_star,
            observed: r.fx,
            t: r.t,
        }),
        None => Ok(()),
    }
}

/// `sum_t (f(x_t) - f*)`.
pub fn cumulative_regret(records: &[QueryRecord], f_star: f64) -> Result<f64, RegretError> {
    check_oracle(records, f_star)?;
    Ok(records.iter().map(|r| r.fx - f_star).sum())
}

/// `min_t f(x_t) - f*`.
pub fn simple_regret(records: &[QueryRecord], f_star: f64) -> Result<f64, RegretError> {
    check_oracle(records, f_star)?;
    records
        .iter()
        .map(|r| r.fx)
        .min_by(f64::total_cmp)
        .map(|best| best - f_star)
        .ok_or(RegretError::EmptyTrace)
}

/// Running cumulative regret after each record.
pub fn running_regret(records: &[QueryRecord], f_star: f64) -> Vec<f64> {
    records
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r.fx - f_star;
            Some(*acc)
        })
        .collect()
}

pub fn certificate_sum(records: &[QueryRecord]) -> f64 {
    records.iter().filter_map(|r| r.certificate).sum()
}

fn check_horizon(t: usize) -> Result<(), RegretError> {
    if t < 2 {
        Err(RegretError::InvalidHorizon(t))
    } else {
        Ok(())
    }
}

fn check_diameter(d: f64) -> Result<(), RegretError> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(RegretError::InvalidDiameter(d))
    }
}

/// `ceil(log2 t)` for `t >= 1`, computed exactly.
fn ceil_log2(t: usize) -> u32 {
    usize::BITS - (t - 1).leading_zeros()
}

/// Lipschitz bound `2 (L D) log2(4T)`.
pub fn bound_lipschitz(l: f64, t: usize, d: f64) -> Result<f64, RegretError> {
    ObjectiveClass::lipschitz(l)?;
    check_horizon(t)?;
    check_diameter(d)?;
    Ok(2.0 * (l * d) * (4.0 * t as f64).log2())
}

/// Smooth bound `2 H D^2`; independent of the horizon.
pub fn bound_smooth(h: f64, d: f64) -> Result<f64, RegretError> {
    ObjectiveClass::smooth(h)?;
    check_diameter(d)?;
    Ok(2.0 * (h * (d * d)))
}

/// Contraction factor `2^-p / (1 - 2^-p)`.
pub fn gamma(p: f64) -> Result<f64, RegretError> {
    ObjectiveClass::fractional(1.0, p)?;
    let half_pow = pow(0.5, p);
    Ok(half_pow / (1.0 - half_pow))
}

/// Fractional bound `2 K' (1 - gamma^(N+1)) / (1 - gamma)` with
/// `K' = K D^p` and `N = ceil(log2 T) + 1`. At `p = 1` (`gamma = 1`) this is
/// the limit `2 K' (N + 1)`.
pub fn bound_fractional(k: f64, p: f64, t: usize, d: f64) -> Result<f64, RegretError> {
    ObjectiveClass::fractional(k, p)?;
    check_horizon(t)?;
    check_diameter(d)?;
    let scaled = k * pow(d, p);
    let n = ceil_log2(t) + 1;
    if p == 1.0 {
        return Ok(2.0 * scaled * f64::from(n + 1));
    }
    let g = gamma(p)?;
    Ok(2.0 * scaled * (1.0 - g.powi(n as i32 + 1)) / (1.0 - g))
}

/// Horizon-free form of [`bound_fractional`] (`N -> inf`):
/// `(2^(p+1) - 2) / (2^p - 2) K D^p`. `None` at `p = 1`, where the bound grows
/// without limit.
pub fn bound_fractional_limit(k: f64, p: f64, d: f64) -> Result<Option<f64>, RegretError> {
    ObjectiveClass::fractional(k, p)?;
    check_diameter(d)?;
    if p == 1.0 {
        return Ok(None);
    }
    let two_p = pow(2.0, p);
    Ok(Some((2.0 * two_p - 2.0) / (two_p - 2.0) * (k * pow(d, p))))
}

/// Class-dispatched bound for a run of `t` queries over a domain of
/// diameter `d`.
pub fn theoretical_bound(class: &ObjectiveClass, t: usize, d: f64) -> Result<f64, RegretError> {
    match *class {
        ObjectiveClass::LipschitzContinuous { l } => bound_lipschitz(l, t, d),
        ObjectiveClass::LipschitzSmooth { h } => bound_smooth(h, d),
        ObjectiveClass::Fractional { k, p } => bound_fractional(k, p, t, d),
    }
}

/// Regret bound for sampling `x_m` inside `(x_l, x_r)`.
pub fn certificate(class: &ObjectiveClass, x_l: f64, x_m: f64, x_r: f64) -> Result<f64, RegretError> {
    if !(x_l < x_m && x_m < x_r) {
        return Err(RegretError::InvalidGeometry(x_l, x_m, x_r));
    }
    let (left, right) = (x_m - x_l, x_r - x_m);
    Ok(match *class {
        ObjectiveClass::LipschitzContinuous { l } => 2.0 * l * left.min(right),
        ObjectiveClass::LipschitzSmooth { h } => 2.0 * h * right * left,
        ObjectiveClass::Fractional { k, p } => {
            let near = left.min(right);
            let span = x_r - x_l;
            k * (pow(near, p) + pow(span - near, p) - pow(span - 2.0 * near, p))
        }
    })
}

/// Regret allowance for the two endpoint queries, which carry no certificate:
/// each is bounded by the class envelope over the whole domain.
pub fn boundary_slack(class: &ObjectiveClass, d: f64) -> f64 {
    2.0 * class.envelope(d)
}

/// Full regret summary of a lower-bounding trace.
pub fn report(trace: &RunTrace, f_star: f64, source: FStarSource) -> Result<RegretReport, RegretError> {
    let class = trace.class.ok_or(RegretError::MissingClass)?;
    let t = trace.len();
    let cumulative_regret = cumulative_regret(&trace.records, f_star)?;
    let theoretical_bound = theoretical_bound(&class, t.max(2), trace.domain.width())?;
    Ok(RegretReport {
        t,
        cumulative_regret,
        simple_regret: simple_regret(&trace.records, f_star)?,
        certificate_sum: certificate_sum(&trace.records),
        theoretical_bound,
        bound_satisfied: cumulative_regret <= theoretical_bound + BOUND_TOL,
        f_star,
        f_star_source: source,
    })
}

/// Worst pointwise slack (`rhs - lhs`) of one inequality over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub worst_slack: f64,
    pub at_p: f64,
    pub at_x: f64,
    pub points: usize,
}

impl InequalityCheck {
    fn new(name: &'static str, statement: &'static str) -> Self {
        Self {
            name,
            statement,
            worst_slack: f64::INFINITY,
            at_p: f64::NAN,
            at_x: f64::NAN,
            points: 0,
        }
    }

    fn record(&mut self, slack: f64, p: f64, x: f64) {
        self.points += 1;
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
            self.at_p = p;
            self.at_x = x;
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst_slack >= -tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.holds(tol))
    }
}

/// `1 - (1 - x)^p` without cancellation for small `x`.
fn one_minus_pow_complement(x: f64, p: f64) -> f64 {
    -(p * (-x).ln_1p()).exp_m1()
}

/// Evaluates the three auxiliary inequalities behind the fractional bound on
/// every `(p, x)` pair:
///
/// * `(1 - (1-2x)^p) / (1 - (1-x)^p) <= 2`
/// * `x^p / (1 - (1-x)^p) <= 2^-p / (1 - 2^-p)`
/// * `x^p + (1-x)^p - (1-2x)^p <= 1`
///
/// `p_grid` must lie in `[1, inf)` and `x_grid` in `(0, 0.5]`.
pub fn verify_inequalities(p_grid: &[f64], x_grid: &[f64]) -> Result<InequalityReport, RegretError> {
    let mut ratio = InequalityCheck::new("ratio", "(1-(1-2x)^p)/(1-(1-x)^p) <= 2");
    let mut contraction = InequalityCheck::new("contraction", "x^p/(1-(1-x)^p) <= 2^-p/(1-2^-p)");
    let mut split = InequalityCheck::new("split", "x^p+(1-x)^p-(1-2x)^p <= 1");
    for &p in p_grid {
        let g = gamma(p)?;
        for &x in x_grid {
            if !(x > 0.0 && x <= 0.5) {
                return Err(RegretError::InvalidGeometry(0.0, x, 0.5));
            }
            let denom = one_minus_pow_complement(x, p);
            let num = one_minus_pow_complement(2.0 * x, p);
            ratio.record(2.0 - num / denom, p, x);
            contraction.record(g - pow(x, p) / denom, p, x);
            let lhs = pow(x, p) + pow(1.0 - x, p) - pow(1.0 - 2.0 * x, p);
            split.record(1.0 - lhs, p, x);
        }
    }
    Ok(InequalityReport {
        checks: vec![ratio, contraction, split],
    })
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` points `0.5 i / n`, `i = 1..=n`, covering `(0, 0.5]`.
pub fn half_open_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5 * i as f64 / n as f64).collect()
}

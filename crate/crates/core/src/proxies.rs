//! Per-interval lower-bounding proxies.
//!
//! Given two adjacent sampled points `(x0, f0)` and `(x1, f1)`, each function
//! class admits a proxy that lower-bounds the objective on `[x0, x1]`:
//!
//! * Lipschitz continuous: two lines with slopes `-L` and `L`,
//! * Lipschitz smooth: two downward parabolas with curvature `H`,
//! * fractional: two cusps `K |x - x_i|^p`.
//!
//! The candidate is the point where the two pieces meet (the proxy minimum) and
//! the score is the proxy value there. All functions here are pure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Candidates closer than `WIDTH_GUARD * (x1 - x0)` to an endpoint are dropped.
pub const WIDTH_GUARD: f64 = 1.0 / 1_099_511_627_776.0; // 2^-40
/// Iteration budget of the fractional candidate bisection.
pub const MAX_BISECT: usize = 200;
/// Residual tolerance of the fractional root, relative to `K (x1 - x0)^p`.
pub const ROOT_TOL: f64 = 1e-12;
/// Agreement tolerance of the two score forms, relative to
/// `|f0| + |f1| + cap`.
pub const SCORE_TOL: f64 = 1e-8;
/// Relative slack before `|f1 - f0| > cap` is reported as a model violation.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxyError {
    #[error("invalid interval: need finite x0 < x1, got [{x0}, {x1}]")]
    InvalidInterval { x0: f64, x1: f64 },
    #[error("non-finite function value at interval endpoint: f0={f0}, f1={f1}")]
    NonFiniteValue { f0: f64, f1: f64 },
    #[error("class constant {name} must be finite and positive, got {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("exponent p must be finite and >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("malformed class `{0}` (expected lipschitz:<L>, smooth:<H> or fractional:<K>:<p>)")]
    Parse(String),
    #[error("score forms disagree: {left} vs {right} (tolerance {tol})")]
    ScoreMismatch { left: f64, right: f64, tol: f64 },
    #[error("bisection did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Regularity assumption on the objective together with its constant(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveClass {
    /// `|f(x) - f(y)| <= L |x - y|`.
    LipschitzContinuous { l: f64 },
    /// `|f'(x) - f'(y)| <= 2H |x - y|`.
    LipschitzSmooth { h: f64 },
    /// `|f(x) - f(x_E)| <= K |x - x_E|^p` around every extremum `x_E`.
    Fractional { k: f64, p: f64 },
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, ProxyError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ProxyError::InvalidConstant { name, value })
    }
}

fn check_exponent(p: f64) -> Result<f64, ProxyError> {
    if p.is_finite() && p >= 1.0 {
        Ok(p)
    } else {
        Err(ProxyError::InvalidExponent(p))
    }
}

/// `base^p`, using integer powers where the exponent allows it.
pub(crate) fn pow(base: f64, p: f64) -> f64 {
    if p == 1.0 {
        base
    } else if p == 2.0 {
        base * base
    } else if p.fract() == 0.0 && p <= 64.0 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}

impl ObjectiveClass {
    pub fn lipschitz(l: f64) -> Result<Self, ProxyError> {
        Ok(Self::LipschitzContinuous {
            l: check_positive("L", l)?,
        })
    }

    pub fn smooth(h: f64) -> Result<Self, ProxyError> {
        Ok(Self::LipschitzSmooth {
            h: check_positive("H", h)?,
        })
    }

    pub fn fractional(k: f64, p: f64) -> Result<Self, ProxyError> {
        Ok(Self::Fractional {
            k: check_positive("K", k)?,
            p: check_exponent(p)?,
        })
    }

    /// Re-checks the invariants; useful for values built through the public
    /// variants directly.
    pub fn validate(&self) -> Result<(), ProxyError> {
        match *self {
            Self::LipschitzContinuous { l } => check_positive("L", l).map(drop),
            Self::LipschitzSmooth { h } => check_positive("H", h).map(drop),
            Self::Fractional { k, p } => {
                check_positive("K", k)?;
                check_exponent(p).map(drop)
            }
        }
    }

    /// The class constant: `L`, `H` or `K`.
    pub fn constant(&self) -> f64 {
        match *self {
            Self::LipschitzContinuous { l } => l,
            Self::LipschitzSmooth { h } => h,
            Self::Fractional { k, .. } => k,
        }
    }

    /// Exponent of the class envelope: 1 for Lipschitz, 2 for smooth, `p`
    /// otherwise.
    pub fn exponent(&self) -> f64 {
        match *self {
            Self::LipschitzContinuous { .. } => 1.0,
            Self::LipschitzSmooth { .. } => 2.0,
            Self::Fractional { p, .. } => p,
        }
    }

    /// Short class name used by the CLI grammar and the JSON summary.
    pub fn name(&self) -> &'static str {
        match self {
            Self::LipschitzContinuous { .. } => "lipschitz",
            Self::LipschitzSmooth { .. } => "smooth",
            Self::Fractional { .. } => "fractional",
        }
    }

    /// Largest function change the class allows across a distance `width`
    /// from an extremum: `L w`, `H w^2` or `K w^p`.
    pub fn envelope(&self, width: f64) -> f64 {
        self.constant() * pow(width, self.exponent())
    }

    /// The same class after the domain is stretched by `factor`
    /// (`x = a + factor * u`): the constant picks up `factor^exponent`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let scale = pow(factor, self.exponent());
        match *self {
            Self::LipschitzContinuous { l } => Self::LipschitzContinuous { l: l * scale },
            Self::LipschitzSmooth { h } => Self::LipschitzSmooth { h: h * scale },
            Self::Fractional { k, p } => Self::Fractional { k: k * scale, p },
        }
    }
}

impl fmt::Display for ObjectiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::LipschitzContinuous { l } => write!(f, "lipschitz:{l}"),
            Self::LipschitzSmooth { h } => write!(f, "smooth:{h}"),
            Self::Fractional { k, p } => write!(f, "fractional:{k}:{p}"),
        }
    }
}

impl FromStr for ObjectiveClass {
    type Err = ProxyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || ProxyError::Parse(s.to_owned());
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| parse_err());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["lipschitz", l] => Self::lipschitz(num(l)?),
            ["smooth", h] => Self::smooth(num(h)?),
            ["fractional", k, p] => Self::fractional(num(k)?, num(p)?),
            _ => Err(parse_err()),
        }
    }
}

/// Two adjacent sampled points and their values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    pub x0: f64,
    pub x1: f64,
    pub f0: f64,
    pub f1: f64,
}

impl IntervalSample {
    pub fn new(x0: f64, x1: f64, f0: f64, f1: f64) -> Result<Self, ProxyError> {
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return Err(ProxyError::InvalidInterval { x0, x1 });
        }
        if !(f0.is_finite() && f1.is_finite()) {
            return Err(ProxyError::NonFiniteValue { f0, f1 });
        }
        Ok(Self { x0, x1, f0, f1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    fn guard(&self) -> f64 {
        WIDTH_GUARD * self.width()
    }

    fn is_interior(&self, x: f64) -> bool {
        let g = self.guard();
        x - self.x0 > g && self.x1 - x > g
    }
}

/// The supplied constant is too small for the observed data on one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelViolation {
    pub interval: IntervalSample,
    pub class: ObjectiveClass,
    /// Smallest constant (same class and exponent) consistent with the interval.
    pub implied_constant: f64,
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let iv = &self.interval;
        write!(
            f,
            "model violation on [{}, {}]: |f1 - f0| = {} exceeds the {} cap; implied constant >= {} (supplied {})",
            iv.x0,
            iv.x1,
            (iv.f1 - iv.f0).abs(),
            self.class.name(),
            self.implied_constant,
            self.class.constant(),
        )
    }
}

/// Result of trying to place a candidate on one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    /// The proxy minimum lies strictly inside the interval.
    Interior(T),
    /// The proxy minimum sits on (or within the width guard of) a sampled
    /// endpoint; nothing worth querying.
    Boundary,
    /// `|f1 - f0|` exceeds the class cap; no candidate is produced.
    Violation(ModelViolation),
}

impl<T> Outcome<T> {
    pub fn interior(self) -> Option<T> {
        match self {
            Outcome::Interior(v) => Some(v),
            _ => None,
        }
    }

    pub fn violation(&self) -> Option<&ModelViolation> {
        match self {
            Outcome::Violation(v) => Some(v),
            _ => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Interior(v) => Outcome::Interior(f(v)),
            Outcome::Boundary => Outcome::Boundary,
            Outcome::Violation(v) => Outcome::Violation(v),
        }
    }
}

/// Returns the violation report when `|f1 - f0|` exceeds `cap` beyond
/// tolerance. Only a linear envelope (`p = 1`) bounds the change between two
/// arbitrary points; for `p > 1` a larger change just means the interval is
/// monotone and its minimum sits on an endpoint.
fn check_cap(iv: &IntervalSample, class: ObjectiveClass) -> Option<ModelViolation> {
    if class.exponent() != 1.0 {
        return None;
    }
    let w = iv.width();
    let cap = class.envelope(w);
    let diff = (iv.f1 - iv.f0).abs();
    let slack = VIOLATION_TOL * (cap + iv.f0.abs() + iv.f1.abs());
    (diff > cap + slack).then(|| ModelViolation {
        interval: *iv,
        class,
        implied_constant: diff / pow(w, class.exponent()),
    })
}

fn place(iv: &IntervalSample, x: f64) -> Outcome<f64> {
    if iv.is_interior(x) {
        Outcome::Interior(x)
    } else {
        Outcome::Boundary
    }
}

/// Intersection of the lines through `(x0, f0)` with slope `-L` and through
/// `(x1, f1)` with slope `L`.
pub fn candidate_lipschitz(iv: &IntervalSample, l: f64) -> Result<Outcome<f64>, ProxyError> {
    let class = ObjectiveClass::lipschitz(l)?;
    if let Some(v) = check_cap(iv, class) {
        return Ok(Outcome::Violation(v));
    }
    let x = 0.5 * (iv.x1 + iv.x0 + (iv.f0 - iv.f1) / l);
    Ok(place(iv, x))
}

/// Proxy minimum `(f0 + f1 - L (x1 - x0)) / 2`. When no interior candidate
/// exists the proxy minimum is the lower endpoint value, which is returned
/// instead.
pub fn score_lipschitz(iv: &IntervalSample, l: f64) -> Result<f64, ProxyError> {
    check_positive("L", l)?;
    let s = 0.5 * (iv.f1 + iv.f0 - l * iv.width());
    Ok(s.min(iv.f0.min(iv.f1)))
}

/// Vertex where the parabolas `f0 - H (x - x0)^2` and `f1 - H (x1 - x)^2` meet.
pub fn candidate_smooth(iv: &IntervalSample, h: f64) -> Result<Outcome<f64>, ProxyError> {
    let class = ObjectiveClass::smooth(h)?;
    if let Some(v) = check_cap(iv, class) {
        return Ok(Outcome::Violation(v));
    }
    let x = 0.5 * (iv.x1 + iv.x0 + (iv.f0 - iv.f1) / (h * iv.width()));
    Ok(place(iv, x))
}

/// `scale` is the magnitude the relative tolerance applies to; `slope` bounds
/// how fast either form moves with `x`, which turns the rounding of the
/// candidate position into an absolute allowance.
fn dual_form_score(
    iv: &IntervalSample,
    left: f64,
    right: f64,
    scale: f64,
    slope: f64,
) -> Result<f64, ProxyError> {
    let position_err = 4.0 * f64::EPSILON * iv.x0.abs().max(iv.x1.abs());
    let tol = SCORE_TOL * scale + 2.0 * slope * position_err;
    if (left - right).abs() > tol {
        return Err(ProxyError::ScoreMismatch { left, right, tol });
    }
    Ok(0.5 * (left + right))
}

/// Score of the smooth candidate `x`: mean of `f0 - H (x - x0)^2` and
/// `f1 - H (x1 - x)^2`, which must agree.
pub fn score_smooth(iv: &IntervalSample, h: f64, x: f64) -> Result<f64, ProxyError> {
    check_positive("H", h)?;
    let left = iv.f0 - h * (x - iv.x0) * (x - iv.x0);
    let right = iv.f1 - h * (iv.x1 - x) * (iv.x1 - x);
    let w = iv.width();
    dual_form_score(iv, left, right, iv.f0.abs() + iv.f1.abs() + h * w * w, 2.0 * h * w)
}

/// Root of `K (x1 - x)^p - K (x - x0)^p - (f1 - f0)`, found by bisection.
///
/// The function is strictly decreasing on `[x0, x1]`, so a sign change on the
/// guarded bracket `[x0 + g, x1 - g]` is both necessary and sufficient for an
/// interior candidate. Bisection runs down to floating-point resolution (or
/// `MAX_BISECT` halvings); the returned point always meets the residual bound
/// `ROOT_TOL * K (x1 - x0)^p` unless the bracket is already at resolution.
pub fn candidate_fractional(
    iv: &IntervalSample,
    k: f64,
    p: f64,
) -> Result<Outcome<f64>, ProxyError> {
    let class = ObjectiveClass::fractional(k, p)?;
    if let Some(v) = check_cap(iv, class) {
        return Ok(Outcome::Violation(v));
    }
    let (x0, x1) = (iv.x0, iv.x1);
    let df = iv.f1 - iv.f0;
    let g = |x: f64| k * pow(x1 - x, p) - k * pow(x - x0, p) - df;

    let mut lo = x0 + iv.guard();
    let mut hi = x1 - iv.guard();
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(lo < hi && g_lo > 0.0 && g_hi < 0.0) {
        return Ok(Outcome::Boundary);
    }

    let mut resolved = false;
    let mut exact = None;
    for _ in 0..MAX_BISECT {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            resolved = true;
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            exact = Some(mid);
            break;
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = match exact {
        Some(x) => x,
        None if g(lo).abs() <= g(hi).abs() => lo,
        None => hi,
    };
    let residual = g(x).abs();
    if exact.is_none() && !resolved && residual > ROOT_TOL * class.envelope(iv.width()) {
        return Err(ProxyError::NoConvergence {
            iterations: MAX_BISECT,
            residual,
        });
    }
    Ok(place(iv, x))
}

/// Score of the fractional candidate `x`: mean of `f0 - K (x - x0)^p` and
/// `f1 - K (x1 - x)^p`, which must agree.
pub fn score_fractional(iv: &IntervalSample, k: f64, p: f64, x: f64) -> Result<f64, ProxyError> {
    check_positive("K", k)?;
    check_exponent(p)?;
    let left = iv.f0 - k * pow(x - iv.x0, p);
    let right = iv.f1 - k * pow(iv.x1 - x, p);
    let w = iv.width();
    dual_form_score(
        iv,
        left,
        right,
        iv.f0.abs() + iv.f1.abs() + k * pow(w, p),
        p * k * pow(w, p - 1.0),
    )
}

/// A not-yet-sampled proxy minimum together with the interval it splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x: f64,
    pub score: f64,
    pub parent: IntervalSample,
}

impl Candidate {
    pub fn x0(&self) -> f64 {
        self.parent.x0
    }

    pub fn x1(&self) -> f64 {
        self.parent.x1
    }

    pub fn width(&self) -> f64 {
        self.parent.width()
    }
}

/// Candidate and score for `iv` under `class`.
pub fn propose(iv: &IntervalSample, class: ObjectiveClass) -> Result<Outcome<Candidate>, ProxyError> {
    let outcome = match class {
        ObjectiveClass::LipschitzContinuous { l } => {
            let x = candidate_lipschitz(iv, l)?;
            match x {
                Outcome::Interior(x) => Outcome::Interior((x, score_lipschitz(iv, l)?)),
                other => other.map(|x| (x, f64::NAN)),
            }
        }
        ObjectiveClass::LipschitzSmooth { h } => match candidate_smooth(iv, h)? {
            Outcome::Interior(x) => Outcome::Interior((x, score_smooth(iv, h, x)?)),
            other => other.map(|x| (x, f64::NAN)),
        },
        ObjectiveClass::Fractional { k, p } => match candidate_fractional(iv, k, p)? {
            Outcome::Interior(x) => Outcome::Interior((x, score_fractional(iv, k, p, x)?)),
            other => other.map(|x| (x, f64::NAN)),
        },
    };
    Ok(outcome.map(|(x, score)| Candidate {
        x,
        score,
        parent: *iv,
    }))
}

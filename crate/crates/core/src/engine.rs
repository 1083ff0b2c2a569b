//! The sequential lower-bounding loop.
//!
//! Both domain endpoints are evaluated first. Every interval between adjacent
//! sampled points carries at most one candidate (its proxy minimum); the loop
//! repeatedly evaluates the candidate with the lowest score, splits its
//! interval at the new point and offers both halves back to the proxies.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proxies::{propose, Candidate, IntervalSample, ModelViolation, ObjectiveClass, Outcome, ProxyError};
use crate::regret;

/// Intervals narrower than this fraction of the domain are not refined.
pub const MIN_WIDTH_FRACTION: f64 = 1e-12;
/// Relative score difference below which two candidates are considered tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid domain [{lo}, {hi}]: need finite lo < hi")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("budget must be at least 2 (both endpoints are always evaluated), got {0}")]
    InvalidBudget(usize),
    #[error("accuracy must be finite and positive, got {0}")]
    InvalidAccuracy(f64),
    #[error("known optimum ({x}, {f}) is not a finite point of the domain")]
    InvalidOptimum { x: f64, f: f64 },
    #[error("objective returned {value} at x = {x} (query {t})")]
    NonFinite {
        t: usize,
        x: f64,
        value: f64,
        /// Records evaluated before the failure.
        prefix: Vec<QueryRecord>,
    },
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Regret(#[from] regret::RegretError),
}

/// Closed search interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lo: f64,
    hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self, EngineError> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(EngineError::InvalidDomain { lo, hi })
        }
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Diameter `D = hi - lo`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: f64,
    pub f: f64,
}

pub type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Black-box objective on a closed interval.
#[derive(Clone)]
pub struct Objective {
    eval: EvalFn,
    domain: Domain,
    known_optimum: Option<Optimum>,
}

impl Objective {
    pub fn new(domain: Domain, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            domain,
            known_optimum: None,
        }
    }

    pub fn with_known_optimum(mut self, x: f64, f: f64) -> Result<Self, EngineError> {
        if !(f.is_finite() && self.domain.contains(x)) {
            return Err(EngineError::InvalidOptimum { x, f });
        }
        self.known_optimum = Some(Optimum { x, f });
        Ok(self)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn known_optimum(&self) -> Option<Optimum> {
        self.known_optimum
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("domain", &self.domain)
            .field("known_optimum", &self.known_optimum)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop after `T` evaluations, the two endpoint queries included.
    Budget(usize),
    /// Stop once `best observed f - lower bound <= epsilon`.
    Accuracy(f64),
    /// Run until no candidate is left.
    Exhaustion,
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), EngineError> {
        match *self {
            Self::Budget(t) if t < 2 => Err(EngineError::InvalidBudget(t)),
            Self::Accuracy(eps) if !(eps.is_finite() && eps > 0.0) => {
                Err(EngineError::InvalidAccuracy(eps))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    AccuracyReached,
    CandidatesExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BudgetExhausted => "budget_exhausted",
            Self::AccuracyReached => "accuracy_reached",
            Self::CandidatesExhausted => "candidates_exhausted",
        })
    }
}

/// One evaluation of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// 1-based time index.
    pub t: usize,
    pub x: f64,
    pub fx: f64,
    /// Candidate score when it was popped; absent for the endpoint queries.
    pub score_at_pop: Option<f64>,
    /// Per-sample regret bound from the parent interval geometry; absent for
    /// the endpoint queries.
    pub certificate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<QueryRecord>,
    pub stop_reason: StopReason,
    /// `None` for traces that do not come from the lower-bounding loop.
    pub class: Option<ObjectiveClass>,
    pub domain: Domain,
    pub diagnostics: Vec<ModelViolation>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best(&self) -> Option<&QueryRecord> {
        self.records.iter().min_by(|a, b| a.fx.total_cmp(&b.fx))
    }
}

/// Heap entry; the greatest entry is the next one to pop.
#[derive(Debug, Clone, Copy)]
struct Queued(Candidate);

impl Queued {
    fn key(&self) -> (f64, f64, f64) {
        (self.0.score, self.0.width(), self.0.x0())
    }
}

impl Ord for Queued {
    // lowest score first; ties go to the wider parent, then the smaller left
    // endpoint
    fn cmp(&self, other: &Self) -> Ordering {
        let (s, w, l) = self.key();
        let (os, ow, ol) = other.key();
        os.total_cmp(&s)
            .then_with(|| w.total_cmp(&ow))
            .then_with(|| ol.total_cmp(&l))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

/// In-progress run. Use [`run`] unless you need to drive the loop by hand.
pub struct Search<'a> {
    objective: &'a Objective,
    class: ObjectiveClass,
    queue: BinaryHeap<Queued>,
    records: Vec<QueryRecord>,
    diagnostics: Vec<ModelViolation>,
    best: f64,
    min_width: f64,
}

impl<'a> Search<'a> {
    /// Evaluates both endpoints (t = 1, 2) and seeds the candidate list.
    pub fn start(objective: &'a Objective, class: ObjectiveClass) -> Result<Self, EngineError> {
        class.validate()?;
        let domain = objective.domain();
        let mut search = Self {
            objective,
            class,
            queue: BinaryHeap::new(),
            records: Vec::new(),
            diagnostics: Vec::new(),
            best: f64::INFINITY,
            min_width: MIN_WIDTH_FRACTION * domain.width(),
        };
        let f_lo = search.evaluate(domain.lo(), None, None)?;
        let f_hi = search.evaluate(domain.hi(), None, None)?;
        search.offer(IntervalSample::new(domain.lo(), domain.hi(), f_lo, f_hi)?)?;
        Ok(search)
    }

    fn evaluate(
        &mut self,
        x: f64,
        score_at_pop: Option<f64>,
        certificate: Option<f64>,
    ) -> Result<f64, EngineError> {
        let t = self.records.len() + 1;
        let fx = self.objective.eval(x);
        if !fx.is_finite() {
            return Err(EngineError::NonFinite {
                t,
                x,
                value: fx,
                prefix: self.records.clone(),
            });
        }
        self.records.push(QueryRecord {
            t,
            x,
            fx,
            score_at_pop,
            certificate,
        });
        self.best = self.best.min(fx);
        Ok(fx)
    }

    fn offer(&mut self, iv: IntervalSample) -> Result<(), EngineError> {
        if iv.width() < self.min_width {
            return Ok(());
        }
        match propose(&iv, self.class)? {
            Outcome::Interior(c) => self.queue.push(Queued(c)),
            Outcome::Boundary => {}
            Outcome::Violation(v) => self.diagnostics.push(v),
        }
        Ok(())
    }

    /// Pops the lowest-score candidate, evaluates it and splits its interval.
    /// Returns `None` when no useful candidate is left.
    ///
    /// Once the lowest score exceeds the best sampled value, the minimum of the
    /// lower-bounding function sits on an already-sampled point and no
    /// remaining candidate can be a minimizer; the list is cleared.
    pub fn step(&mut self) -> Result<Option<QueryRecord>, EngineError> {
        if self.queue.peek().is_some_and(|q| q.0.score > self.best) {
            self.queue.clear();
        }
        let Some(c) = self.pop_with_ties() else {
            return Ok(None);
        };
        let cert = regret::certificate(&self.class, c.x0(), c.x, c.x1())?;
        let fx = self.evaluate(c.x, Some(c.score), Some(cert))?;
        let parent = c.parent;
        self.offer(IntervalSample::new(parent.x0, c.x, parent.f0, fx)?)?;
        self.offer(IntervalSample::new(c.x, parent.x1, fx, parent.f1)?)?;
        Ok(self.records.last().copied())
    }

    /// Pops the lowest-score candidate. Scores within `TIE_TOL` (relative) of
    /// the minimum count as tied, and ties go to the wider parent, then the
    /// smaller left endpoint. Exact ties are common (both children of a
    /// Lipschitz split share one score) and only differ by round-off.
    fn pop_with_ties(&mut self) -> Option<Candidate> {
        let Queued(first) = self.queue.pop()?;
        let tol = TIE_TOL * (first.score.abs() + self.best.abs());
        let mut tied = Vec::new();
        while let Some(q) = self.queue.peek() {
            if q.0.score - first.score > tol {
                break;
            }
            tied.extend(self.queue.pop());
        }
        if tied.is_empty() {
            return Some(first);
        }
        tied.push(Queued(first));
        let pick = (0..tied.len())
            .max_by(|&i, &j| {
                let (a, b) = (&tied[i].0, &tied[j].0);
                a.width()
                    .total_cmp(&b.width())
                    .then_with(|| b.x0().total_cmp(&a.x0()))
            })
            .expect("non-empty");
        let chosen = tied.swap_remove(pick).0;
        self.queue.extend(tied);
        Some(chosen)
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    /// Live candidates, in no particular order.
    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.queue.iter().map(|q| &q.0)
    }

    pub fn next_candidate(&self) -> Option<&Candidate> {
        self.queue.peek().map(|q| &q.0)
    }

    pub fn best_value(&self) -> f64 {
        self.best
    }

    /// Minimum of the current lower-bounding function: the lowest candidate
    /// score, or the best sample when no interval has a lower proxy minimum.
    pub fn lower_bound(&self) -> f64 {
        self.next_candidate()
            .map_or(self.best, |c| c.score.min(self.best))
    }

    /// Optimality gap certified by the samples so far.
    pub fn gap(&self) -> f64 {
        self.best - self.lower_bound()
    }

    pub fn diagnostics(&self) -> &[ModelViolation] {
        &self.diagnostics
    }

    pub fn finish(self, stop_reason: StopReason) -> RunTrace {
        RunTrace {
            records: self.records,
            stop_reason,
            class: Some(self.class),
            domain: self.objective.domain(),
            diagnostics: self.diagnostics,
        }
    }
}

/// Runs the lower-bounding loop until `stop` fires or no candidate is left.
pub fn run(objective: &Objective, class: ObjectiveClass, stop: StoppingRule) -> Result<RunTrace, EngineError> {
    stop.validate()?;
    let mut search = Search::start(objective, class)?;
    let reason = loop {
        match stop {
            StoppingRule::Budget(t) if search.records.len() >= t => {
                break StopReason::BudgetExhausted;
            }
            StoppingRule::Accuracy(eps) if search.gap() <= eps => {
                break StopReason::AccuracyReached;
            }
            _ => {}
        }
        if search.step()?.is_none() {
            break StopReason::CandidatesExhausted;
        }
    };
    Ok(search.finish(reason))
}

/// Affine map between the unit interval and a native domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    offset: f64,
    scale: f64,
}

impl AffineMap {
    pub fn to_native(&self, u: f64) -> f64 {
        self.offset + self.scale * u
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    /// Maps a trace recorded on `[0, 1]` back to native coordinates. Values,
    /// scores and certificates are unchanged by the reparametrisation.
    pub fn trace_to_native(&self, trace: &RunTrace) -> RunTrace {
        let mut out = trace.clone();
        for r in &mut out.records {
            r.x = self.to_native(r.x);
        }
        out.domain = Domain {
            lo: self.offset,
            hi: self.offset + self.scale,
        };
        out.class = trace.class.map(|c| c.rescaled(1.0 / self.scale));
        out
    }
}

/// Reparametrises `objective` onto `[0, 1]`; the class constant is rescaled
/// by `D^exponent` so proxies, scores and certificates are preserved.
pub fn rescale(
    objective: &Objective,
    class: ObjectiveClass,
) -> Result<(Objective, ObjectiveClass, AffineMap), EngineError> {
    class.validate()?;
    let domain = objective.domain();
    let map = AffineMap {
        offset: domain.lo(),
        scale: domain.width(),
    };
    let eval = Arc::clone(&objective.eval);
    let normalized = Objective {
        eval: Arc::new(move |u| eval(map.to_native(u))),
        domain: Domain::unit(),
        known_optimum: objective.known_optimum.map(|o| Optimum {
            x: map.to_unit(o.x).clamp(0.0, 1.0),
            f: o.f,
        }),
    };
    Ok((normalized, class.rescaled(domain.width()), map))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(x0: f64, x1: f64, score: f64) -> Queued {
        Queued(Candidate {
            x: 0.5 * (x0 + x1),
            score,
            parent: IntervalSample::new(x0, x1, 0.0, 0.0).unwrap(),
        })
    }

    fn unit(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Objective {
        Objective::new(Domain::unit(), f)
    }

    #[test]
    fn queue_pops_lowest_score() {
        let mut heap = BinaryHeap::from(vec![cand(0.0, 0.5, -0.2), cand(0.5, 1.0, -0.5)]);
        assert_eq!(heap.pop().unwrap().0.score, -0.5);
    }

    #[test]
    fn queue_ties_prefer_wider_then_leftmost() {
        let mut heap = BinaryHeap::from(vec![
            cand(0.0, 0.25, -0.3),
            cand(0.25, 0.75, -0.3),
            cand(0.75, 1.0, -0.3),
        ]);
        assert_eq!(heap.pop().unwrap().0.width(), 0.5);
        assert_eq!(heap.pop().unwrap().0.x0(), 0.0);
        assert_eq!(heap.pop().unwrap().0.x0(), 0.75);
    }

    #[test]
    fn round_off_ties_use_width() {
        // both children of the first split tie in exact arithmetic; the wider
        // one must go first regardless of the last-ulp score difference
        let obj = unit(|x| (x - 0.3).abs() * 0.5);
        let mut s = Search::start(&obj, ObjectiveClass::lipschitz(1.0).unwrap()).unwrap();
        s.step().unwrap();
        let mut kids: Vec<Candidate> = s.candidates().copied().collect();
        assert_eq!(kids.len(), 2);
        assert!((kids[0].score - kids[1].score).abs() < 1e-15);
        kids.sort_by(|a, b| b.width().total_cmp(&a.width()));
        let rec = s.step().unwrap().unwrap();
        assert_eq!(rec.x, kids[0].x);
    }

    #[test]
    fn single_candidate_step() {
        let obj = unit(|x| (x - 0.5).abs());
        let mut s = Search::start(&obj, ObjectiveClass::lipschitz(1.0).unwrap()).unwrap();
        assert_eq!(s.candidates().count(), 1);
        let rec = s.step().unwrap().unwrap();
        assert_eq!((rec.t, rec.x, rec.fx), (3, 0.5, 0.0));
        assert_eq!(rec.score_at_pop, Some(0.0));
        assert!(s.candidates().count() <= 2);
    }

    #[test]
    fn abs_objective_hits_minimizer_on_third_query() {
        let obj = unit(|x| (x - 0.5).abs());
        let trace = run(&obj, ObjectiveClass::lipschitz(1.0).unwrap(), StoppingRule::Budget(3)).unwrap();
        let xs: Vec<f64> = trace.records.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 0.5]);
        assert_eq!(trace.records[2].fx, 0.0);
        assert_eq!(trace.stop_reason, StopReason::BudgetExhausted);
    }

    #[test]
    fn constant_objective_third_score() {
        let obj = unit(|_| 2.0);
        let trace = run(&obj, ObjectiveClass::lipschitz(1.0).unwrap(), StoppingRule::Budget(3)).unwrap();
        assert_eq!(trace.records[2].x, 0.5);
        assert_eq!(trace.records[2].score_at_pop, Some(1.5));
        assert!(trace.records[..2].iter().all(|r| r.score_at_pop.is_none() && r.certificate.is_none()));
    }

    #[test]
    fn quadratic_certificates_hold() {
        let obj = unit(|x| (x - 0.3) * (x - 0.3));
        let cls = ObjectiveClass::smooth(1.0).unwrap();
        for t in 2..=50 {
            let trace = run(&obj, cls, StoppingRule::Budget(t)).unwrap();
            for r in trace.records.iter().skip(2) {
                assert!(r.certificate.unwrap() >= r.fx - 0.0);
            }
        }
    }

    #[test]
    fn budget_stops_early_when_candidates_run_out() {
        let obj = unit(|x| (x - 0.5).abs());
        let trace = run(&obj, ObjectiveClass::lipschitz(1.0).unwrap(), StoppingRule::Budget(100)).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.stop_reason, StopReason::CandidatesExhausted);
    }

    #[test]
    fn accuracy_stop() {
        let obj = unit(|x| (6.0 * x).sin());
        let trace = run(&obj, ObjectiveClass::lipschitz(6.0).unwrap(), StoppingRule::Accuracy(1e-3)).unwrap();
        assert_eq!(trace.stop_reason, StopReason::AccuracyReached);
        let best = trace.best().unwrap().fx;
        assert!(best + 1.0 <= 1e-3);
    }

    #[test]
    fn exhaustion_terminates() {
        // slopes are exactly +-L everywhere, so every proxy is tight
        let obj = unit(|x| ((x - 0.2).abs() + 0.1).min((x - 0.7).abs()));
        let trace = run(&obj, ObjectiveClass::lipschitz(1.0).unwrap(), StoppingRule::Exhaustion).unwrap();
        assert_eq!(trace.stop_reason, StopReason::CandidatesExhausted);
        assert!(trace.len() < 20, "{}", trace.len());
        assert!(trace.best().unwrap().fx.abs() < 1e-12);
    }

    #[test]
    fn violations_are_recorded_not_fatal() {
        let obj = unit(|x| (x - 0.3).abs());
        let trace = run(&obj, ObjectiveClass::lipschitz(0.1).unwrap(), StoppingRule::Budget(50)).unwrap();
        assert!(!trace.diagnostics.is_empty());
        assert!(trace.diagnostics.iter().all(|v| v.implied_constant > 0.1));
    }

    #[test]
    fn non_finite_evaluation_aborts_with_prefix() {
        let obj = unit(|x| if x > 0.0 && x < 1.0 { f64::NAN } else { x });
        let err = run(&obj, ObjectiveClass::lipschitz(2.0).unwrap(), StoppingRule::Budget(10)).unwrap_err();
        match err {
            EngineError::NonFinite { t, prefix, .. } => {
                assert_eq!(t, 3);
                assert_eq!(prefix.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_rules_and_domains() {
        assert!(StoppingRule::Budget(1).validate().is_err());
        assert!(StoppingRule::Accuracy(0.0).validate().is_err());
        assert!(Domain::new(1.0, 1.0).is_err());
        assert!(unit(|x| x).with_known_optimum(2.0, 0.0).is_err());
    }

    #[test]
    fn rescale_constants() {
        let obj = Objective::new(Domain::new(0.0, 2.0).unwrap(), |x| x);
        let (_, l, _) = rescale(&obj, ObjectiveClass::lipschitz(1.0).unwrap()).unwrap();
        assert_eq!(l.constant(), 2.0);
        let (_, h, _) = rescale(&obj, ObjectiveClass::smooth(1.0).unwrap()).unwrap();
        assert_eq!(h.constant(), 4.0);
        let id = unit(|x| x);
        let (n, c, map) = rescale(&id, ObjectiveClass::smooth(3.0).unwrap()).unwrap();
        assert_eq!(c.constant(), 3.0);
        assert_eq!(n.domain(), Domain::unit());
        assert_eq!(map.to_native(0.25), 0.25);
    }
}

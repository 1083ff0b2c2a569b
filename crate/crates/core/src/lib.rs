//! Univariate global optimization by sequential lower bounding.
//!
//! The optimizer keeps, for every gap between adjacent samples, the minimum of
//! a class-specific lower-bounding proxy and always evaluates the lowest one
//! next. Three regularity classes are supported:
//!
//! * [`ObjectiveClass::LipschitzContinuous`] with constant `L`,
//! * [`ObjectiveClass::LipschitzSmooth`] with constant `H`,
//! * [`ObjectiveClass::Fractional`] with constants `K` and `p >= 1`.
//!
//! Every evaluation carries a regret certificate computed from the interval
//! geometry alone, and [`regret`] turns traces into cumulative/simple regret
//! and compares them with the closed-form bounds for each class.
//!
//! ```
//! use pshubert::{run, Domain, Objective, ObjectiveClass, StoppingRule};
//!
//! let f = Objective::new(Domain::unit(), |x| (x - 0.5f64).abs());
//! let trace = run(&f, ObjectiveClass::lipschitz(1.0).unwrap(), StoppingRule::Budget(3)).unwrap();
//! assert_eq!(trace.records[2].x, 0.5);
//! ```

pub mod bench;
pub mod engine;
pub mod proxies;
pub mod regret;

pub use engine::{
    rescale, run, AffineMap, Domain, EngineError, Objective, Optimum, QueryRecord, RunTrace, Search, StopReason,
    StoppingRule,
};
pub use proxies::{propose, Candidate, IntervalSample, ModelViolation, ObjectiveClass, Outcome, ProxyError};
pub use regret::{FStarSource, RegretError, RegretReport};

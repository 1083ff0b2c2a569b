//! Benchmark corpus, brute-force optimum oracle and a uniform-grid baseline.

use std::f64::consts::FRAC_PI_4;

use thiserror::Error;

use crate::engine::{Domain, EngineError, Objective, Optimum, QueryRecord, RunTrace, StopReason};
use crate::proxies::{pow, ObjectiveClass};

/// Grid resolution used by the acceptance runs.
pub const ORACLE_N: usize = 100_000;
/// Golden-section iterations inside the best grid cell.
pub const GOLDEN_ITERS: usize = 50;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("oracle grid needs at least 1000 cells, got {0}")]
    GridTooCoarse(usize),
    #[error("objective returned {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("baseline needs at least 2 queries, got {0}")]
    InvalidBudget(usize),
    #[error("{entry}: {class} constant violated near x = {x} (observed {observed}, allowed {allowed})")]
    ConstantViolated {
        entry: String,
        class: &'static str,
        x: f64,
        observed: f64,
        allowed: f64,
    },
    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// An objective with a tight class constant and its analytic optimum.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub objective: Objective,
    pub class: ObjectiveClass,
    pub true_optimum: Optimum,
    /// Interior extrema, used to check fractional envelopes.
    pub extrema: Vec<f64>,
}

fn eval_checked(obj: &Objective, x: f64) -> Result<f64, BenchError> {
    let v = obj.eval(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(BenchError::NonFinite { x, value: v })
    }
}

fn golden_section(obj: &Objective, mut lo: f64, mut hi: f64, iters: usize) -> Result<(f64, f64), BenchError> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval_checked(obj, c)?;
    let mut fd = eval_checked(obj, d)?;
    for _ in 0..iters {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval_checked(obj, c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval_checked(obj, d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Brute-force minimum: `n + 1` uniform samples, then a golden-section pass
/// over the two cells adjacent to the best sample. Never worse than the grid.
pub fn grid_oracle(obj: &Objective, n: usize) -> Result<Optimum, BenchError> {
    if n < 1000 {
        return Err(BenchError::GridTooCoarse(n));
    }
    let dom = obj.domain();
    let at = |i: usize| dom.lo() + dom.width() * i as f64 / n as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..=n {
        let v = eval_checked(obj, at(i))?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let (i, f_grid) = best;
    let lo = at(i.saturating_sub(1));
    let hi = at((i + 1).min(n));
    let (x_ref, f_ref) = golden_section(obj, lo, hi, GOLDEN_ITERS)?;
    Ok(if f_ref < f_grid {
        Optimum { x: x_ref, f: f_ref }
    } else {
        Optimum { x: at(i), f: f_grid }
    })
}

/// `T` equally spaced queries, endpoints included, in increasing order.
pub fn baseline_uniform(obj: &Objective, t: usize) -> Result<RunTrace, BenchError> {
    if t < 2 {
        return Err(BenchError::InvalidBudget(t));
    }
    let dom = obj.domain();
    let records = (0..t)
        .map(|i| {
            let x = if i == t - 1 {
                dom.hi()
            } else {
                dom.lo() + dom.width() * i as f64 / (t - 1) as f64
            };
            Ok(QueryRecord {
                t: i + 1,
                x,
                fx: eval_checked(obj, x)?,
                score_at_pop: None,
                certificate: None,
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    Ok(RunTrace {
        records,
        stop_reason: StopReason::BudgetExhausted,
        class: None,
        domain: dom,
        diagnostics: Vec::new(),
    })
}

fn entry(
    name: &'static str,
    domain: (f64, f64),
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    class: ObjectiveClass,
    optimum: (f64, f64),
    extrema: Vec<f64>,
) -> CorpusEntry {
    let domain = Domain::new(domain.0, domain.1).expect("corpus domain");
    let objective = Objective::new(domain, f)
        .with_known_optimum(optimum.0, optimum.1)
        .expect("corpus optimum");
    CorpusEntry {
        name,
        objective,
        class,
        true_optimum: Optimum {
            x: optimum.0,
            f: optimum.1,
        },
        extrema,
    }
}

/// Triangle wave on `[0, 2]`: slopes +-1, zeros at `0.1 + 0.4 k`, peaks of
/// 0.2 in between.
fn sawtooth(x: f64) -> f64 {
    0.2 - ((x - 0.1).rem_euclid(0.4) - 0.2).abs()
}

/// `|x - c|^p` left of `c` and `ratio |x - c|^p` right of it. The
/// asymmetry keeps the proxies from landing on `c` in one step.
fn skewed_power(x: f64, c: f64, p: f64, ratio: f64) -> f64 {
    let d = x - c;
    if d < 0.0 {
        pow(-d, p)
    } else {
        ratio * pow(d, p)
    }
}

/// The built-in corpus. Every class has at least two entries and every
/// constant is the tight one.
pub fn default_corpus() -> Vec<CorpusEntry> {
    let lip = |l| ObjectiveClass::lipschitz(l).expect("L");
    let smooth = |h| ObjectiveClass::smooth(h).expect("H");
    let frac = |k, p| ObjectiveClass::fractional(k, p).expect("K, p");
    vec![
        entry("abs03", (0.0, 1.0), |x| (x - 0.3).abs(), lip(1.0), (0.3, 0.0), vec![0.3]),
        entry(
            "sawtooth",
            (0.0, 2.0),
            sawtooth,
            lip(1.0),
            (0.1, 0.0),
            vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9],
        ),
        entry(
            "sin6",
            (0.0, 1.0),
            |x| (6.0 * x).sin(),
            lip(6.0),
            (FRAC_PI_4, -1.0),
            vec![FRAC_PI_4 / 3.0, FRAC_PI_4],
        ),
        entry("quad03", (0.0, 1.0), |x| (x - 0.3) * (x - 0.3), smooth(1.0), (0.3, 0.0), vec![0.3]),
        entry(
            "sin6_smooth",
            (0.0, 1.0),
            |x| (6.0 * x).sin(),
            smooth(18.0),
            (FRAC_PI_4, -1.0),
            vec![FRAC_PI_4 / 3.0, FRAC_PI_4],
        ),
        // f'' = 12 x^2 - 4 peaks at 23 on [-1.5, 1.5]
        entry(
            "quartic",
            (-1.5, 1.5),
            |x| (x * x - 1.0) * (x * x - 1.0),
            smooth(11.5),
            (-1.0, 0.0),
            vec![-1.0, 0.0, 1.0],
        ),
        entry(
            "pow15",
            (0.0, 1.0),
            |x| (x - 0.3).abs().powf(1.5),
            frac(1.0, 1.5),
            (0.3, 0.0),
            vec![0.3],
        ),
        entry(
            "pow2",
            (0.0, 1.0),
            |x| (x - 0.65) * (x - 0.65),
            frac(1.0, 2.0),
            (0.65, 0.0),
            vec![0.65],
        ),
        entry(
            "abs_skew",
            (0.0, 1.0),
            |x| skewed_power(x, 0.3, 1.0, 0.4),
            lip(1.0),
            (0.3, 0.0),
            vec![0.3],
        ),
        entry(
            "quad_skew",
            (0.0, 1.0),
            |x| skewed_power(x, 0.3, 2.0, 0.25),
            smooth(1.0),
            (0.3, 0.0),
            vec![0.3],
        ),
        entry(
            "pow15_skew",
            (0.0, 1.0),
            |x| skewed_power(x, 0.3, 1.5, 0.4),
            frac(1.0, 1.5),
            (0.3, 0.0),
            vec![0.3],
        ),
        entry(
            "pow2_skew",
            (0.0, 1.0),
            |x| skewed_power(x, 0.65, 2.0, 0.3),
            frac(1.0, 2.0),
            (0.65, 0.0),
            vec![0.65],
        ),
    ]
}

/// The corpus with every constant spot-checked on a 10^4-point scan.
pub fn load_corpus() -> Result<Vec<CorpusEntry>, BenchError> {
    let corpus = default_corpus();
    for e in &corpus {
        verify_constant(e, 10_000)?;
    }
    Ok(corpus)
}

pub fn find_entry<'a>(corpus: &'a [CorpusEntry], name: &str) -> Result<&'a CorpusEntry, BenchError> {
    corpus
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| BenchError::UnknownEntry(name.to_owned()))
}

/// Finite-difference check of the entry's class constant on `n` cells:
/// first differences for Lipschitz, second differences for smooth, and the
/// envelope around each listed extremum for fractional classes.
pub fn verify_constant(entry: &CorpusEntry, n: usize) -> Result<(), BenchError> {
    let obj = &entry.objective;
    let dom = obj.domain();
    let h = dom.width() / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| dom.lo() + h * i as f64).collect();
    let fs = xs
        .iter()
        .map(|&x| eval_checked(obj, x))
        .collect::<Result<Vec<_>, _>>()?;
    let f_scale = fs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let violated = |x: f64, observed: f64, allowed: f64| BenchError::ConstantViolated {
        entry: entry.name.to_owned(),
        class: entry.class.name(),
        x,
        observed,
        allowed,
    };
    match entry.class {
        ObjectiveClass::LipschitzContinuous { l } => {
            let allowed = l * (1.0 + 1e-9) + 4.0 * f64::EPSILON * f_scale / h;
            for i in 0..n {
                let slope = (fs[i + 1] - fs[i]).abs() / (xs[i + 1] - xs[i]);
                if slope > allowed {
                    return Err(violated(xs[i], slope, allowed));
                }
            }
        }
        ObjectiveClass::LipschitzSmooth { h: hc } => {
            let allowed = 2.0 * hc * (1.0 + 1e-6) + 8.0 * f64::EPSILON * f_scale / (h * h);
            for i in 1..n {
                let curv = (fs[i + 1] - 2.0 * fs[i] + fs[i - 1]).abs() / (h * h);
                if curv > allowed {
                    return Err(violated(xs[i], curv, allowed));
                }
            }
        }
        ObjectiveClass::Fractional { k, p } => {
            for &xe in &entry.extrema {
                let fe = eval_checked(obj, xe)?;
                for (&x, &fx) in xs.iter().zip(&fs) {
                    let change = (fx - fe).abs();
                    let allowed = k * pow((x - xe).abs(), p) * (1.0 + 1e-9) + 1e-12;
                    if change > allowed {
                        return Err(violated(x, change, allowed));
                    }
                }
            }
        }
    }
    Ok(())
}

//! Numerical self-checks: auxiliary inequalities, bound identities and
//! agreement of the fractional proxy with its closed-form special cases.

use pshubert::regret::{
    bound_fractional, bound_fractional_limit, bound_lipschitz, gamma, half_open_grid, linspace,
    verify_inequalities, InequalityReport,
};
use pshubert::{propose, IntervalSample, ObjectiveClass, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

pub const INEQUALITY_TOL: f64 = 1e-12;
pub const CONSISTENCY_TOL: f64 = 1e-9;
pub const FIXTURE_SEED: u64 = 0x05ee_d0fc_1a55;

pub fn inequalities(p_max: f64, grid: usize) -> Result<InequalityReport, CliError> {
    if p_max.is_nan() || p_max < 1.0 || grid == 0 {
        return Err(CliError::Usage(format!("need p-max >= 1 and a non-empty grid (got {p_max}, {grid})")));
    }
    Ok(verify_inequalities(&linspace(1.0, p_max, grid), &half_open_grid(grid))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub holds: bool,
}

/// Closed-form identities of the bound calculator.
pub fn identities() -> Result<Vec<IdentityCheck>, CliError> {
    let mut out = Vec::new();
    let mut push = |name: String, holds: bool| out.push(IdentityCheck { name, holds });

    push("gamma(2) = 1/3".into(), gamma(2.0)? == 1.0 / 3.0);

    let mut unit_p = true;
    for k in [0.25, 1.0, 1.7, 6.0, 18.0] {
        for d in [0.5, 1.0, 2.0, 3.0, 7.3] {
            for e in 1..=20 {
                let t = 1usize << e;
                unit_p &= bound_fractional(k, 1.0, t, d)? == bound_lipschitz(k, t, d)?;
            }
        }
    }
    push("fractional bound at p = 1 equals Lipschitz bound (T = 2^e)".into(), unit_p);

    let mut limit_two = true;
    for k in [0.25, 1.0, 1.7, 6.0, 18.0] {
        for d in [0.5, 1.0, 2.0, 3.0, 7.3] {
            limit_two &= bound_fractional_limit(k, 2.0, d)? == Some(3.0 * (k * (d * d)));
        }
    }
    push("limit of fractional bound at p = 2 equals 3 K D^2".into(), limit_two);

    let ratio_ok = linspace(2.0, 64.0, 6201).into_iter().all(|p| {
        let two_p = 2f64.powf(p);
        (2.0 * two_p - 2.0) / (two_p - 2.0) <= 3.0
    });
    push("(2^(p+1) - 2) / (2^p - 2) <= 3 for p >= 2".into(), ratio_ok);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub fixtures: usize,
    pub max_x_error: f64,
    pub max_score_error: f64,
    pub mismatched_outcomes: usize,
}

impl ConsistencyReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.mismatched_outcomes == 0 && self.max_x_error <= tol && self.max_score_error <= tol
    }
}

/// Random interval whose value change stays inside the envelope of `class`.
fn fixture(rng: &mut ChaCha8Rng, class: ObjectiveClass) -> IntervalSample {
    let x0 = rng.gen_range(-10.0..10.0);
    let w = rng.gen_range(1e-3..10.0);
    let f0 = rng.gen_range(-10.0..10.0);
    let u: f64 = rng.gen_range(-0.98..0.98);
    IntervalSample::new(x0, x0 + w, f0, f0 + u * class.envelope(w)).expect("valid fixture")
}

/// Compares the fractional proxy at `p = 1` and `p = 2` against the Lipschitz
/// and smooth proxies on `n` seeded fixtures per exponent. With `fault`, the
/// reference constant is perturbed so the check must fail.
pub fn class_consistency(n: usize, seed: u64, fault: bool) -> Result<ConsistencyReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ConsistencyReport {
        fixtures: 0,
        max_x_error: 0.0,
        max_score_error: 0.0,
        mismatched_outcomes: 0,
    };
    for i in 0..n {
        let c = rng.gen_range(0.1..10.0);
        let skew = if fault && i == 0 { 1.0 + 1e-3 } else { 1.0 };
        let pairs = [
            (ObjectiveClass::lipschitz(c * skew)?, ObjectiveClass::fractional(c, 1.0)?),
            (ObjectiveClass::smooth(c * skew)?, ObjectiveClass::fractional(c, 2.0)?),
        ];
        for (reference, fractional) in pairs {
            let iv = fixture(&mut rng, fractional);
            rep.fixtures += 1;
            match (propose(&iv, reference)?, propose(&iv, fractional)?) {
                (Outcome::Interior(a), Outcome::Interior(b)) => {
                    rep.max_x_error = rep.max_x_error.max((a.x - b.x).abs());
                    rep.max_score_error = rep.max_score_error.max((a.score - b.score).abs());
                }
                (Outcome::Boundary, Outcome::Boundary) => {}
                _ => rep.mismatched_outcomes += 1,
            }
        }
    }
    Ok(rep)
}

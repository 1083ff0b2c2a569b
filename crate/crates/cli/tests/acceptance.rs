//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pshubert::bench::{default_corpus, grid_oracle, CorpusEntry, ORACLE_N};
use pshubert::engine::{run, StoppingRule};
use pshubert::regret::{
    bound_fractional, bound_fractional_limit, bound_lipschitz, bound_smooth, cumulative_regret,
    gamma, half_open_grid, linspace, verify_inequalities,
};
use pshubert::{ObjectiveClass, RunTrace};
use pshubert_cli::trace_csv::{read_file, rows_from_records, write_rows};
use pshubert_cli::verify::{class_consistency, FIXTURE_SEED};
use tempfile::TempDir;

const BOUND_TOL: f64 = 1e-8;
const TIME_LIMIT: Duration = Duration::from_secs(1);
const BUDGETS: [usize; 8] = [4, 8, 16, 32, 64, 128, 256, 512];

type Check = fn() -> Verdict;

struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self { ok, detail: detail.into() }
    }
}

fn entries(pred: impl Fn(&ObjectiveClass) -> bool) -> Vec<CorpusEntry> {
    default_corpus().into_iter().filter(|e| pred(&e.class)).collect()
}

fn oracle(e: &CorpusEntry) -> f64 {
    grid_oracle(&e.objective, ORACLE_N).expect("oracle").f
}

/// The lower of the analytic and brute-force optima, so regret is never
/// understated.
fn conservative_f_star(e: &CorpusEntry) -> f64 {
    e.true_optimum.f.min(oracle(e))
}

fn budget_run(e: &CorpusEntry, t: usize) -> RunTrace {
    run(&e.objective, e.class, StoppingRule::Budget(t)).expect("run")
}

/// Worst `regret - bound` over every prefix of a 512-query run, plus the
/// wall time of that run.
fn worst_prefix_excess(e: &CorpusEntry, bound: impl Fn(usize) -> f64) -> (f64, Duration) {
    let start = Instant::now();
    let trace = budget_run(e, 512);
    let elapsed = start.elapsed();
    let f_star = conservative_f_star(e);
    let worst = (2..=trace.len())
        .map(|t| cumulative_regret(&trace.records[..t], f_star).unwrap() - bound(t))
        .fold(f64::NEG_INFINITY, f64::max);
    (worst, elapsed)
}

fn lipschitz_bound() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in entries(|c| matches!(c, ObjectiveClass::LipschitzContinuous { .. })) {
        let ObjectiveClass::LipschitzContinuous { l } = e.class else { unreachable!() };
        let d = e.objective.domain().width();
        let f_star = conservative_f_star(&e);
        let start = Instant::now();
        let mut worst = f64::NEG_INFINITY;
        for t in BUDGETS {
            let trace = budget_run(&e, t);
            let r = cumulative_regret(&trace.records, f_star).unwrap();
            worst = worst.max(r - bound_lipschitz(l, t, d).unwrap());
        }
        let elapsed = start.elapsed();
        ok &= worst <= BOUND_TOL && elapsed < TIME_LIMIT;
        parts.push(format!("{} max(R-B)={worst:.3e} {elapsed:.0?}", e.name));
    }
    Verdict::new(ok, parts.join("; "))
}

fn smooth_bound() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in entries(|c| matches!(c, ObjectiveClass::LipschitzSmooth { .. })) {
        let ObjectiveClass::LipschitzSmooth { h } = e.class else { unreachable!() };
        let d = e.objective.domain().width();
        let b = bound_smooth(h, d).unwrap();
        let (worst, elapsed) = worst_prefix_excess(&e, |_| b);
        ok &= worst <= BOUND_TOL && elapsed < TIME_LIMIT;
        parts.push(format!("{} max(R-B)={worst:.3e} {elapsed:.0?}", e.name));
    }
    Verdict::new(ok, parts.join("; "))
}

fn fractional_bound() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut exponents = Vec::new();
    for e in entries(|c| matches!(c, ObjectiveClass::Fractional { .. })) {
        let ObjectiveClass::Fractional { k, p } = e.class else { unreachable!() };
        exponents.push(p);
        let d = e.objective.domain().width();
        let (worst, _) = worst_prefix_excess(&e, |t| bound_fractional(k, p, t, d).unwrap());
        ok &= worst <= BOUND_TOL;
        parts.push(format!("{} (p={p}) max(R-B)={worst:.3e}", e.name));
    }
    ok &= exponents.contains(&1.5) && exponents.contains(&2.0);
    Verdict::new(ok, parts.join("; "))
}

fn certificates() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for e in default_corpus() {
        let f_star = oracle(&e);
        for r in budget_run(&e, 512).records.iter().skip(2) {
            worst = worst.max(r.fx - f_star - r.certificate.expect("certificate"));
            checked += 1;
        }
    }
    Verdict::new(worst <= BOUND_TOL, format!("{checked} records, max(regret - certificate)={worst:.3e}"))
}

fn score_soundness() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for e in default_corpus() {
        let f_star = oracle(&e);
        for r in budget_run(&e, 512).records.iter().skip(2) {
            worst = worst.max(r.score_at_pop.expect("score") - f_star);
            checked += 1;
        }
    }
    Verdict::new(worst <= 1e-6, format!("{checked} pops, max(score - f*)={worst:.3e}"))
}

fn class_consistency_check() -> Verdict {
    let rep = class_consistency(10_000, FIXTURE_SEED, false).expect("fixtures");
    Verdict::new(
        rep.holds(1e-9),
        format!(
            "{} fixtures, max |dx|={:.3e}, max |dscore|={:.3e}, {} outcome mismatches",
            rep.fixtures, rep.max_x_error, rep.max_score_error, rep.mismatched_outcomes
        ),
    )
}

fn identities() -> Verdict {
    let gamma_ok = gamma(2.0).unwrap() == 1.0 / 3.0;
    let mut unit_ok = true;
    let mut limit_ok = true;
    for k in [0.3, 1.0, 2.5, 6.0] {
        for d in [0.5, 1.0, 1.5, 3.0] {
            for e in 1..=20 {
                let t = 1usize << e;
                unit_ok &= bound_fractional(k, 1.0, t, d).unwrap() == bound_lipschitz(k, t, d).unwrap();
            }
            limit_ok &= bound_fractional_limit(k, 2.0, d).unwrap() == Some(3.0 * (k * (d * d)));
        }
    }
    let ratio_ok = linspace(2.0, 32.0, 3001).into_iter().all(|p| {
        let two_p = 2f64.powf(p);
        (2.0 * two_p - 2.0) / (two_p - 2.0) <= 3.0
    });
    Verdict::new(
        gamma_ok && unit_ok && limit_ok && ratio_ok,
        format!("gamma(2)=1/3: {gamma_ok}; p=1 equals Lipschitz (T=2^e): {unit_ok}; p=2 limit = 3KD^2: {limit_ok}; ratio <= 3 on p in [2,32]: {ratio_ok}"),
    )
}

fn inequalities() -> Verdict {
    let rep = verify_inequalities(&linspace(1.0, 4.0, 1000), &half_open_grid(1000)).unwrap();
    let detail = rep
        .checks
        .iter()
        .map(|c| format!("{} worst slack {:.3e} ({} points)", c.name, c.worst_slack, c.points))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(rep.holds(1e-12), detail)
}

fn invoke(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pshubert"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("PSHUBERT_OUT_DIR")
        .output()
        .expect("spawn pshubert");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism_and_round_trip() -> Verdict {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let commands: [&[&str]; 3] = [
        &["run", "--objective", "sin6", "--budget", "300"],
        &["run", "--objective", "pow15_skew", "--exhaust"],
        &["bench", "--budgets", "4,16,64", "--entries", "sin6,quartic,pow2_skew"],
    ];
    let mut identical = true;
    for args in commands {
        identical &= invoke(a.path(), args) == invoke(b.path(), args);
    }
    let files = ["sin6.trace.csv", "sin6.summary.json", "pow15_skew.trace.csv", "pow15_skew.summary.json", "bench.csv"];
    for f in files {
        identical &= std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
    }

    let e = default_corpus().into_iter().find(|e| e.name == "sin6").unwrap();
    let expected = rows_from_records(&budget_run(&e, 300).records, e.true_optimum.f);
    let path = a.path().join("sin6.trace.csv");
    let parsed = read_file(&path).unwrap();
    let values_exact = parsed.len() == expected.len()
        && parsed.iter().zip(&expected).all(|(p, q)| {
            let bits = |o: Option<f64>| o.map(f64::to_bits);
            p.t == q.t
                && p.x.to_bits() == q.x.to_bits()
                && p.f.to_bits() == q.f.to_bits()
                && bits(p.score) == bits(q.score)
                && bits(p.certificate) == bits(q.certificate)
                && p.cum_regret.to_bits() == q.cum_regret.to_bits()
        });
    let mut rewritten = Vec::new();
    write_rows(&mut rewritten, &parsed).unwrap();
    let bytes_exact = rewritten == std::fs::read(&path).unwrap();
    Verdict::new(
        identical && values_exact && bytes_exact,
        format!("byte-identical reruns: {identical}; parsed values bit-exact: {values_exact}; rewrite byte-exact: {bytes_exact}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("Lipschitz regret bound, T in 4..512, < 1 s per entry", lipschitz_bound),
        ("smooth regret bound for every T <= 512, < 1 s per entry", smooth_bound),
        ("fractional regret bound for every T <= 512", fractional_bound),
        ("per-sample certificates cover regret", certificates),
        ("popped scores lower-bound the optimum", score_soundness),
        ("fractional proxy matches closed forms at p = 1, 2", class_consistency_check),
        ("bound calculator identities", identities),
        ("auxiliary inequalities on a 1000 x 1000 grid", inequalities),
        ("determinism and exact CSV round-trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let v = check();
        let tag = if v.ok { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, v.detail);
        failed += usize::from(!v.ok);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Argument definitions and subcommand handlers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand};
use pshubert::bench::{find_entry, load_corpus, CorpusEntry};
use pshubert::engine::{run, StoppingRule};
use pshubert::regret::{self, bound_fractional_limit, gamma, theoretical_bound};
use pshubert::{EngineError, FStarSource, ObjectiveClass};

use crate::error::CliError;
use crate::matrix::{self, BenchConfig, DEFAULT_BUDGETS};
use crate::summary::Summary;
use crate::trace_csv;
use crate::verify::{self, CONSISTENCY_TOL, FIXTURE_SEED, INEQUALITY_TOL};

#[derive(Debug, Parser)]
#[command(name = "pshubert", version, about = "Univariate lower-bounding global optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one corpus objective and write its trace and summary.
    Run(RunArgs),
    /// Run the corpus by budget matrix against the uniform baseline.
    Bench(BenchArgs),
    /// Evaluate the regret bound of a class.
    Bounds(BoundsArgs),
    /// Check the auxiliary inequalities and proxy consistency.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("stop").required(true).args(["budget", "accuracy", "exhaust"])))]
pub struct RunArgs {
    /// Corpus entry name.
    #[arg(long)]
    pub objective: String,
    /// Class override: `lipschitz:<L>`, `smooth:<H>` or `fractional:<K>:<p>`.
    #[arg(long)]
    pub class: Option<ObjectiveClass>,
    /// Total number of queries, endpoints included.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Stop once best value minus lowest score is at most this.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Run until no candidates remain.
    #[arg(long)]
    pub exhaust: bool,
    /// Fail when the class constant is contradicted by the samples.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, env = "PSHUBERT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated budgets; default 4,8,...,256.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Comma-separated corpus entries; default all.
    #[arg(long, value_delimiter = ',')]
    pub entries: Option<Vec<String>>,
    /// TOML file with optional `entries` and `budgets` keys; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "PSHUBERT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl FromStr for Horizon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Self::Infinite);
        }
        s.parse()
            .map(Self::Finite)
            .map_err(|_| format!("expected a query count or `inf`, got `{s}`"))
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(t) => write!(f, "{t}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub class: ObjectiveClass,
    /// Number of queries, or `inf`.
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<Horizon>,
    /// Domain diameter.
    #[arg(long = "D", value_name = "D", default_value_t = 1.0)]
    pub diameter: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest exponent on the inequality grid.
    #[arg(long, default_value_t = 4.0)]
    pub p_max: f64,
    /// Points per axis of the inequality grid.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Random interval fixtures per exponent for the consistency check.
    #[arg(long, default_value_t = 10_000)]
    pub fixtures: usize,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Self::Passed
        } else {
            Self::Failed
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Bounds(a) => cmd_bounds(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>")(e)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn stopping_rule(a: &RunArgs) -> StoppingRule {
    match (a.budget, a.accuracy) {
        (Some(t), _) => StoppingRule::Budget(t),
        (_, Some(eps)) => StoppingRule::Accuracy(eps),
        _ => StoppingRule::Exhaustion,
    }
}

pub fn trace_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.trace.csv"))
}

pub fn summary_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.summary.json"))
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let corpus = load_corpus()?;
    let entry = find_entry(&corpus, &a.objective)?;
    let class = a.class.unwrap_or(entry.class);
    let f_star = entry.true_optimum.f;
    ensure_dir(&a.out_dir)?;
    let csv_path = trace_path(&a.out_dir, entry.name);

    let trace = match run(&entry.objective, class, stopping_rule(a)) {
        Ok(trace) => trace,
        Err(EngineError::NonFinite { t, x, value, prefix }) => {
            trace_csv::write_file(&csv_path, &trace_csv::rows_from_records(&prefix, f_star))?;
            return Err(EngineError::NonFinite { t, x, value, prefix }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let report = regret::report(&trace, f_star, FStarSource::Known)?;
    trace_csv::write_file(&csv_path, &trace_csv::rows_from_records(&trace.records, f_star))?;
    let summary = Summary::new(entry.name, class, trace.stop_reason, &report);
    summary.write_file(&summary_path(&a.out_dir, entry.name))?;

    writeln!(
        out,
        "{}: {} queries ({}), cumulative regret {:.6e}, bound {:.6e}{}",
        entry.name,
        report.t,
        trace.stop_reason,
        report.cumulative_regret,
        report.theoretical_bound,
        if report.bound_satisfied { "" } else { " EXCEEDED" }
    )
    .map_err(stdout_err)?;

    if let Some(first) = trace.diagnostics.first() {
        let n = trace.diagnostics.len();
        let level = if a.strict { "error" } else { "warning" };
        eprintln!("{level}: {n} model violation(s); first: {first}");
        if a.strict {
            return Ok(Status::Failed);
        }
    }
    Ok(Status::Passed)
}

fn select_entries(corpus: &[CorpusEntry], names: Option<&[String]>) -> Result<Vec<CorpusEntry>, CliError> {
    match names {
        None => Ok(corpus.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| find_entry(corpus, n.trim()).cloned().map_err(CliError::from))
            .collect(),
    }
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let config = match &a.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    let budgets = a
        .budgets
        .clone()
        .or(config.budgets)
        .unwrap_or_else(|| DEFAULT_BUDGETS.to_vec());
    if budgets.is_empty() {
        return Err(CliError::Usage("no budgets given".into()));
    }
    let corpus = load_corpus()?;
    let names = a.entries.clone().or(config.entries);
    let entries = select_entries(&corpus, names.as_deref())?;

    let rows = matrix::bench_matrix(&entries, &budgets)?;
    ensure_dir(&a.out_dir)?;
    matrix::write_csv(&a.out_dir.join("bench.csv"), &rows)?;

    writeln!(
        out,
        "{:<12} {:>5} {:>5} {:>13} {:>13} {:>13} {:>13}  ok",
        "entry", "T", "used", "cum_regret", "bound", "simple", "base_simple"
    )
    .map_err(stdout_err)?;
    for r in &rows {
        writeln!(
            out,
            "{:<12} {:>5} {:>5} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}  {}",
            r.entry,
            r.budget,
            r.queries,
            r.cumulative_regret,
            r.bound,
            r.simple_regret,
            r.baseline_simple_regret,
            r.bound_satisfied
        )
        .map_err(stdout_err)?;
    }
    let failed = rows.iter().filter(|r| !r.bound_satisfied).count();
    if failed > 0 {
        eprintln!("error: {failed} cell(s) exceed the regret bound");
    }
    Ok(Status::from_ok(failed == 0))
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let class = a.class;
    let d = a.diameter;
    let mut line = |key: &str, v: &dyn fmt::Display| writeln!(out, "{key} = {v}").map_err(stdout_err);

    let limit = match class {
        ObjectiveClass::Fractional { k, p } => {
            line("gamma", &gamma(p)?)?;
            bound_fractional_limit(k, p, d)?
        }
        _ => None,
    };
    match (class, a.horizon) {
        (ObjectiveClass::LipschitzSmooth { .. }, _) => {
            line("bound", &theoretical_bound(&class, 2, d)?)?;
        }
        (_, Some(Horizon::Finite(t))) => {
            line("bound", &theoretical_bound(&class, t, d)?)?;
        }
        (_, Some(Horizon::Infinite)) => match limit {
            Some(v) => line("bound", &v)?,
            None => {
                return Err(CliError::Usage(format!("the {} bound grows without limit in T", class.name())));
            }
        },
        (_, None) => {
            return Err(CliError::Usage(format!("--T is required for the {} bound", class.name())));
        }
    }
    if let (Some(v), Some(Horizon::Finite(_))) = (limit, a.horizon) {
        line("limit", &v)?;
    }
    Ok(Status::Passed)
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let mut all = true;
    let ineq = verify::inequalities(a.p_max, a.grid)?;
    for c in &ineq.checks {
        let ok = c.holds(INEQUALITY_TOL);
        all &= ok;
        writeln!(
            out,
            "{} inequality {:<12} {}  worst slack {:.3e} at p = {}, x = {} ({} points)",
            pass_fail(ok),
            c.name,
            c.statement,
            c.worst_slack,
            c.at_p,
            c.at_x,
            c.points
        )
        .map_err(stdout_err)?;
    }
    for c in verify::identities()? {
        all &= c.holds;
        writeln!(out, "{} identity {}", pass_fail(c.holds), c.name).map_err(stdout_err)?;
    }
    let cons = verify::class_consistency(a.fixtures, FIXTURE_SEED, a.inject_fault)?;
    let ok = cons.holds(CONSISTENCY_TOL);
    all &= ok;
    writeln!(
        out,
        "{} consistency fractional p = 1, 2 vs closed forms: {} fixtures, max |dx| {:.3e}, max |dscore| {:.3e}, {} outcome mismatches",
        pass_fail(ok),
        cons.fixtures,
        cons.max_x_error,
        cons.max_score_error,
        cons.mismatched_outcomes
    )
    .map_err(stdout_err)?;
    Ok(Status::from_ok(all))
}

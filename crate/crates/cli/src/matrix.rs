//! Corpus by budget benchmark table.

use std::fs::File;
use std::path::Path;

use pshubert::bench::{baseline_uniform, CorpusEntry};
use pshubert::engine::{run, StoppingRule};
use pshubert::regret::{cumulative_regret, report, simple_regret};
use pshubert::{FStarSource, StopReason};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_BUDGETS: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

/// Optional TOML file restricting the matrix.
///
/// ```toml
/// entries = ["abs03", "quad03"]
/// budgets = [4, 16, 64]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub entries: Option<Vec<String>>,
    pub budgets: Option<Vec<usize>>,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|source| CliError::Config {
            path: path.to_owned(),
            source,
        })
    }
}

/// One `(entry, T)` cell, with the uniform-grid baseline alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub entry: String,
    pub class: String,
    #[serde(rename = "T")]
    pub budget: usize,
    pub queries: usize,
    pub stop_reason: StopReason,
    pub cumulative_regret: f64,
    pub simple_regret: f64,
    pub certificate_sum: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
    pub baseline_cumulative_regret: f64,
    pub baseline_simple_regret: f64,
}

fn cell(entry: &CorpusEntry, budget: usize) -> Result<BenchRow, CliError> {
    let f_star = entry.true_optimum.f;
    let trace = run(&entry.objective, entry.class, StoppingRule::Budget(budget))?;
    let rep = report(&trace, f_star, FStarSource::Known)?;
    let base = baseline_uniform(&entry.objective, budget)?;
    Ok(BenchRow {
        entry: entry.name.to_owned(),
        class: entry.class.to_string(),
        budget,
        queries: rep.t,
        stop_reason: trace.stop_reason,
        cumulative_regret: rep.cumulative_regret,
        simple_regret: rep.simple_regret,
        certificate_sum: rep.certificate_sum,
        bound: rep.theoretical_bound,
        bound_satisfied: rep.bound_satisfied,
        baseline_cumulative_regret: cumulative_regret(&base.records, f_star)?,
        baseline_simple_regret: simple_regret(&base.records, f_star)?,
    })
}

/// Rows ordered by entry, then budget, whatever the evaluation order.
pub fn bench_matrix(entries: &[CorpusEntry], budgets: &[usize]) -> Result<Vec<BenchRow>, CliError> {
    let cells: Vec<(&CorpusEntry, usize)> = entries
        .iter()
        .flat_map(|e| budgets.iter().map(move |&t| (e, t)))
        .collect();
    cells.into_par_iter().map(|(e, t)| cell(e, t)).collect()
}

pub fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

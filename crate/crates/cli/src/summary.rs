//! Run summary written next to the trace as JSON.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use pshubert::{FStarSource, ObjectiveClass, RegretReport, StopReason};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub class: String,
    pub constant: f64,
    /// Exponent of a fractional class; `null` otherwise.
    pub p: Option<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    pub stop_reason: StopReason,
    pub cumulative_regret: f64,
    pub simple_regret: f64,
    pub certificate_sum: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
    pub f_star: f64,
    pub f_star_source: FStarSource,
}

impl Summary {
    pub fn new(name: &str, class: ObjectiveClass, stop_reason: StopReason, report: &RegretReport) -> Self {
        Self {
            name: name.to_owned(),
            class: class.name().to_owned(),
            constant: class.constant(),
            p: matches!(class, ObjectiveClass::Fractional { .. }).then(|| class.exponent()),
            t: report.t,
            stop_reason,
            cumulative_regret: report.cumulative_regret,
            simple_regret: report.simple_regret,
            certificate_sum: report.certificate_sum,
            bound: report.theoretical_bound,
            bound_satisfied: report.bound_satisfied,
            f_star: report.f_star,
            f_star_source: report.f_star_source,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), CliError> {
        let mut file = File::create(path).map_err(CliError::io(path))?;
        file.write_all(self.to_json()?.as_bytes()).map_err(CliError::io(path))
    }

    pub fn read_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

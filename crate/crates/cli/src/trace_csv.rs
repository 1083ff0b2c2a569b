//! Per-query trace table: `t,x,f,score,certificate,cum_regret`.
//!
//! Floats are written with 17 significant digits so a read after a write
//! reproduces every value bit for bit. Absent optionals are empty fields.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pshubert::regret::running_regret;
use pshubert::QueryRecord;

use crate::error::CliError;

pub const HEADER: [&str; 6] = ["t", "x", "f", "score", "certificate", "cum_regret"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub x: f64,
    pub f: f64,
    pub score: Option<f64>,
    pub certificate: Option<f64>,
    pub cum_regret: f64,
}

pub fn rows_from_records(records: &[QueryRecord], f_star: f64) -> Vec<TraceRow> {
    records
        .iter()
        .zip(running_regret(records, f_star))
        .map(|(r, cum_regret)| TraceRow {
            t: r.t,
            x: r.x,
            f: r.fx,
            score: r.score_at_pop,
            certificate: r.certificate,
            cum_regret,
        })
        .collect()
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            format_float(r.x),
            format_float(r.f),
            format_opt(r.score),
            format_opt(r.certificate),
            format_float(r.cum_regret),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_float(field: &str, line: u64) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::TraceFormat(format!("line {line}: bad number `{field}`")))
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>, CliError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_float(field, line).map(Some)
    }
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<TraceRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if !header.iter().eq(HEADER) {
        return Err(CliError::TraceFormat(format!(
            "expected header `{}`, found `{}`",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = rec[0]
            .parse()
            .map_err(|_| CliError::TraceFormat(format!("line {line}: bad index `{}`", &rec[0])))?;
        rows.push(TraceRow {
            t,
            x: parse_float(&rec[1], line)?,
            f: parse_float(&rec[2], line)?,
            score: parse_opt(&rec[3], line)?,
            certificate: parse_opt(&rec[4], line)?,
            cum_regret: parse_float(&rec[5], line)?,
        });
    }
    Ok(rows)
}

pub fn write_file(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    write_rows(file, rows)
}

pub fn read_file(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    read_rows(file)
}

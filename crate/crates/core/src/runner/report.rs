//! Byte-stable CSV and JSON report writers.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimator::SweepReport;
use crate::grid::write_dump;

use super::config::ReportFormat;

/// Fixed float rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON value of a float: its fixed rendering as a string (`inf` and `nan` included).
pub fn json_f64(v: f64) -> Value {
    Value::String(fmt_f64(v))
}

fn json_list(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| json_f64(x)).collect())
}

/// File name of the dump holding slot `slot` of the witness of row `row`.
pub fn witness_name(row: usize, slot: usize) -> String {
    format!("witness_{row:03}_{slot}.txt")
}

pub fn csv_text(report: &SweepReport) -> Result<String> {
    check(report)?;
    let n = report.rows[0].lambda.len();
    let mut header: Vec<String> = Vec::new();
    header.extend((1..=n).map(|i| format!("lambda{i}")));
    header.extend((1..=n).map(|i| format!("rho{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.extend(["estimate", "gamma", "classification", "seed"].map(String::from));
    let mut s = header.join(",");
    s.push('\n');
    for row in &report.rows {
        let mut cells: Vec<String> = Vec::new();
        cells.extend(row.lambda.iter().map(|&v| fmt_f64(v)));
        cells.extend(row.rho.iter().map(|&v| fmt_f64(v)));
        cells.extend(report.profile.p_list().iter().map(|&v| fmt_f64(v)));
        cells.push(fmt_f64(row.estimate.value));
        cells.push(fmt_f64(row.gamma));
        cells.push(row.classification.label().into());
        cells.push(row.estimate.meta.seed.to_string());
        let _ = writeln!(s, "{}", cells.join(","));
    }
    Ok(s)
}

pub fn json_value(report: &SweepReport) -> Result<Value> {
    check(report)?;
    let rows: Vec<Value> = report
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let witness: Vec<String> = (0..row.estimate.witness.len()).map(|s| witness_name(i, s)).collect();
            json!({
                "lambda": json_list(&row.lambda),
                "rho": json_list(&row.rho),
                "p": json_list(report.profile.p_list()),
                "estimate": json_f64(row.estimate.value),
                "gamma": json_f64(row.gamma),
                "classification": row.classification.label(),
                "seed": row.estimate.meta.seed,
                "family": row.estimate.meta.family.label(),
                "candidate": row.estimate.meta.candidate,
                "iterations": row.estimate.meta.iterations,
                "refine_steps": row.estimate.meta.refine_steps,
                "limit_value": row.limit_value.map(json_f64),
                "witness": witness,
            })
        })
        .collect();
    Ok(json!({
        "target": report.target.label(),
        "uniformity_ratio": json_f64(report.uniformity_ratio),
        "classification": report.classification.label(),
        "rows": rows,
    }))
}

fn check(report: &SweepReport) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Validation("refusing to emit a report with no rows".into()));
    }
    Ok(())
}

/// Writes `report` to `path` in `format`.
pub fn emit_report(report: &SweepReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => csv_text(report)?,
        ReportFormat::Json => pretty(&json_value(report)?)?,
    };
    write_text(path, &text)
}

/// Dumps every witness next to the report, named by [`witness_name`].
pub fn write_witnesses(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, row) in report.rows.iter().enumerate() {
        for (s, w) in row.estimate.witness.iter().enumerate() {
            let path = dir.join(witness_name(i, s));
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut out = BufWriter::new(file);
            write_dump(w, &mut out)?;
            out.flush().map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("cannot write {}: {e}", path.display()))
}

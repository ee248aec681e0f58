//! CSV rows for solve runs. Formatting is deterministic: stable column
//! order, numbers rounded to six significant digits and printed with the
//! shortest round-tripping decimal representation.

use std::path::Path;

use anyhow::{Context, Result};

pub const CSV_HEADER: &str = "instance,method,scenarios,param,seed,status,objective,bound,\
gap_percent,time_reduction,time_root,time_bnc,time_total,nodes,cuts_subtour,cuts_capacity,\
cuts_connectivity,cuts_transferred,tight_ratio";

/// Rounds to six significant digits, then prints the shortest decimal form.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - mag);
    format!("{}", (x * scale).round() / scale)
}

#[derive(Debug, Clone)]
pub struct Row {
    pub instance: String,
    pub method: String,
    pub scenarios: usize,
    pub param: String,
    pub seed: u64,
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub gap_percent: f64,
    pub time_reduction: f64,
    pub time_root: f64,
    pub time_bnc: f64,
    pub nodes: usize,
    pub cuts_subtour: usize,
    pub cuts_capacity: usize,
    pub cuts_connectivity: usize,
    pub cuts_transferred: usize,
    pub tight_ratio: f64,
    /// Failure detail for status "error"; not part of the CSV columns.
    pub message: String,
}

impl Row {
    pub fn error(instance: String, method: &str, seed: u64, message: String) -> Self {
        Row {
            instance,
            method: method.to_string(),
            scenarios: 0,
            param: String::new(),
            seed,
            status: "error".into(),
            objective: f64::INFINITY,
            bound: f64::NEG_INFINITY,
            gap_percent: f64::INFINITY,
            time_reduction: 0.0,
            time_root: 0.0,
            time_bnc: 0.0,
            nodes: 0,
            cuts_subtour: 0,
            cuts_capacity: 0,
            cuts_connectivity: 0,
            cuts_transferred: 0,
            tight_ratio: 0.0,
            message,
        }
    }

    pub fn time_total(&self) -> f64 {
        self.time_reduction + self.time_root + self.time_bnc
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.instance,
            self.method,
            self.scenarios,
            self.param,
            self.seed,
            self.status,
            fmt_sig(self.objective),
            fmt_sig(self.bound),
            fmt_sig(self.gap_percent),
            fmt_sig(self.time_reduction),
            fmt_sig(self.time_root),
            fmt_sig(self.time_bnc),
            fmt_sig(self.time_total()),
            self.nodes,
            self.cuts_subtour,
            self.cuts_capacity,
            self.cuts_connectivity,
            self.cuts_transferred,
            fmt_sig(self.tight_ratio),
        )
    }
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

/// Appends one row, creating the file with a header line when needed.
pub fn append_row(path: &Path, row: &Row) -> Result<()> {
    let existing = std::fs::read_to_string(path).unwrap_or_default();
    let mut out = existing;
    if out.is_empty() {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    out.push_str(&row.to_line());
    out.push('\n');
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

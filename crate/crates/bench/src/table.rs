use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Outcome of one (instance, variant) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fval: Option<f64>,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_err: Option<f64>,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub termination: Option<String>,
    /// Set when the run raised an error; such runs count as failures.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Identifies a table row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub family: String,
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub p: Option<f64>,
    pub variant: String,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub family: String,
    /// Number of observations for completion rows.
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fval_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fval_min: Option<f64>,
    pub succ: usize,
    pub fail: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iter_succ: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_succ: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_err: Option<f64>,
    /// Per-run records, kept only in detail mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runs: Option<Vec<RunRecord>>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl TableRow {
    /// Aggregate runs into a row. Means skip errored runs and non-finite values.
    pub fn aggregate(key: RowKey, runs: &[RunRecord], keep_runs: bool) -> Self {
        let ok = || runs.iter().filter(|r| r.error.is_none());
        let finite_fvals = || runs.iter().filter_map(|r| r.fval).filter(|v| v.is_finite());
        let succ = runs.iter().filter(|r| r.success).count();
        TableRow {
            family: key.family,
            m: key.m,
            n: key.n,
            rank: key.rank,
            p: key.p,
            variant: key.variant,
            alpha: key.alpha,
            iter: mean(ok().filter_map(|r| r.iterations).map(|i| i as f64)),
            fval: mean(finite_fvals()),
            fval_max: finite_fvals().reduce(f64::max),
            fval_min: finite_fvals().reduce(f64::min),
            succ,
            fail: runs.len() - succ,
            time_s: mean(ok().map(|r| r.wall_time)),
            iter_succ: mean(runs.iter().filter(|r| r.success).filter_map(|r| r.iterations).map(|i| i as f64)),
            time_succ: mean(runs.iter().filter(|r| r.success).map(|r| r.wall_time)),
            rel_err: mean(runs.iter().filter_map(|r| r.rel_err).filter(|v| v.is_finite())),
            runs: keep_runs.then(|| runs.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunTable {
    pub rows: Vec<TableRow>,
}

pub const CSV_HEADER: &str =
    "family,m,n,rank,p,variant,alpha,iter,fval,fval_max,fval_min,succ,fail,time_s,iter_succ,time_succ,rel_err";

/// Columns that depend on the machine and are ignored by determinism checks.
pub const TIME_COLUMNS: [&str; 2] = ["time_s", "time_succ"];

fn sci(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.5e}")).unwrap_or_default()
}

impl RunTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.family,
                r.m,
                r.n,
                r.rank,
                sci(r.p),
                r.variant,
                sci(r.alpha),
                sci(r.iter),
                sci(r.fval),
                sci(r.fval_max),
                sci(r.fval_min),
                r.succ,
                r.fail,
                sci(r.time_s),
                sci(r.iter_succ),
                sci(r.time_succ),
                sci(r.rel_err),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table rows always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Write the table to `path`, or to stdout when `path` is `None`.
pub fn emit_table(table: &RunTable, format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let text = table.render(format);
    match path {
        Some(path) => fs::write(path, text).map_err(|source| BenchError::Io { path: path.to_path_buf(), source }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| BenchError::Io { path: "<stdout>".into(), source })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, fval: f64, success: bool) -> RunRecord {
        RunRecord {
            trial,
            seed: trial as u64,
            iterations: Some(10 * (trial + 1)),
            fval: Some(fval),
            success,
            rel_err: None,
            wall_time: 0.5,
            termination: Some("Converged".into()),
            error: None,
        }
    }

    fn key() -> RowKey {
        RowKey { family: "feas".into(), m: 5, n: 20, rank: 1, p: None, variant: "DR".into(), alpha: Some(2.0) }
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(RunTable::default().to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn aggregate_and_csv_line() {
        let runs = vec![record(0, 1e-13, true), record(1, 2.0, false), record(2, f64::INFINITY, false)];
        let row = TableRow::aggregate(key(), &runs, false);
        assert_eq!((row.succ, row.fail), (1, 2));
        assert_eq!(row.iter, Some(20.0));
        assert_eq!(row.fval_max, Some(2.0));
        assert_eq!(row.fval_min, Some(1e-13));
        assert_eq!(row.iter_succ, Some(10.0));
        assert_eq!(row.rel_err, None);
        let csv = RunTable { rows: vec![row] }.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "feas,5,20,1,,DR,2.00000e0,2.00000e1,1.00000e0,2.00000e0,1.00000e-13,1,2,5.00000e-1,1.00000e1,5.00000e-1,"
        );
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn errored_runs_count_as_failures() {
        let mut bad = record(1, 0.0, false);
        bad.iterations = None;
        bad.fval = None;
        bad.error = Some("diverged".into());
        let row = TableRow::aggregate(key(), &[record(0, 0.5, true), bad], false);
        assert_eq!((row.succ, row.fail), (1, 1));
        assert_eq!(row.iter, Some(10.0));
    }
}

//! Result tables.
//!
//! CSV columns, in order:
//! `mechanism,n,alpha,eps,q,mean_rel_err,p10,p90,sketch_size,full_size,wall_time`.
//! JSON is `{"metadata": {...}, "results": [...]}` with the same field
//! names. Records are sorted by `(mechanism, n, alpha, eps, q)`.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::experiment::ExperimentResult;

pub const CSV_COLUMNS: [&str; 11] = [
    "mechanism",
    "n",
    "alpha",
    "eps",
    "q",
    "mean_rel_err",
    "p10",
    "p90",
    "sketch_size",
    "full_size",
    "wall_time",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub source: String,
    pub trials: usize,
    pub universe_lo: f64,
    pub universe_hi: f64,
    pub universe_cardinality: u64,
    pub exponent_divisor: String,
    pub stddev: String,
    pub exact_reference: String,
    pub percentiles: String,
    pub skipped_rows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub results: Vec<ExperimentResult>,
}

pub fn sort_results(results: &mut [ExperimentResult]) {
    results.sort_by(|a, b| {
        (a.mechanism, a.n)
            .cmp(&(b.mechanism, b.n))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.eps.total_cmp(&b.eps))
            .then(a.q.total_cmp(&b.q))
    });
}

pub fn write_csv<W: Write>(out: W, results: &[ExperimentResult]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn write_json<W: Write>(mut out: W, report: &Report) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")
}

/// Writes to `path`, or stdout when it is `None`.
pub fn emit_results(report: &Report, format: Format, path: Option<&Path>) -> Result<()> {
    let io_err = |source| BenchError::Io {
        path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    };
    let mut buf = Vec::new();
    match format {
        Format::Json => write_json(&mut buf, report),
        Format::Csv => write_csv(&mut buf, &report.results),
    }
    .map_err(io_err)?;
    match path {
        Some(p) => std::fs::write(p, &buf).map_err(io_err),
        None => std::io::stdout().lock().write_all(&buf).map_err(io_err),
    }
}

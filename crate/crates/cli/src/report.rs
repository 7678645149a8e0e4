use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use ipq_core::stats::ChiSquare;
use ipq_core::QueryCounter;
use serde::Serialize;

use crate::CliError;

/// One JSON object per run. Only `wall_time_ms` varies between identical
/// invocations.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    pub result: T,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<Assertion>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Queries {
    pub row: u64,
    pub col: u64,
    pub total: u64,
}

impl From<QueryCounter> for Queries {
    fn from(q: QueryCounter) -> Self {
        Self {
            row: q.row_queries,
            col: q.col_queries,
            total: q.total(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub df: usize,
    /// Upper 0.001 quantile; advisory only.
    pub critical_value_0_001: f64,
}

impl From<ChiSquare> for ChiSquareReport {
    fn from(c: ChiSquare) -> Self {
        Self {
            statistic: c.statistic,
            df: c.df,
            critical_value_0_001: ChiSquare::critical_value(c.df, 3.0902),
        }
    }
}

pub struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

pub fn emit<T: Serialize>(report: &Report<T>, json_out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match json_out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

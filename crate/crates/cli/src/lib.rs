//! The `ipq` command-line driver. Every command except `gen` without `-o`
//! emits one JSON report.

pub mod args;
mod commands;
mod input;
pub mod report;

use std::io;
use std::path::PathBuf;

use ipq_core::bfe::BfeError;
use ipq_core::general::GeneralError;
use ipq_core::instances::InstanceError;
use ipq_core::params::ParamError;
use ipq_core::{MatrixError, OracleError, RegrError, SauError};
use thiserror::Error;

pub use commands::run;

/// Largest `n` for which `--verify` traverses the whole matrix.
pub const VERIFY_MAX_N: usize = 8192;
/// Largest `n` for which `sample` builds the exact target law.
pub const EXACT_LAW_MAX_N: usize = 512;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: MatrixError },
    #[error("{path}: {source}")]
    LoadGraph {
        path: PathBuf,
        source: InstanceError,
    },
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("--verify is refused for n = {0} > {VERIFY_MAX_N}")]
    VerifyTooLarge(usize),
    #[error("{var} = {value:?} is not a positive number")]
    BadEnv { var: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("sampler exhausted its attempts {failures} times before reaching {wanted} samples")]
    TooManyFailures { failures: u64, wanted: u64 },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Regr(#[from] RegrError),
    #[error(transparent)]
    Bfe(#[from] BfeError),
    #[error(transparent)]
    Sau(#[from] SauError),
    #[error(transparent)]
    General(#[from] GeneralError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    AssertionFailed,
}

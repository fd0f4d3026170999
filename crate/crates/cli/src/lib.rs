//! Command-line front end: scenario sweeps, fits of measured traces and
//! configuration checks.

pub mod commands;
pub mod config;
pub mod scenario;
pub mod sweep;

use qps_core::QpsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, files or data. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<QpsError> for CliError {
    fn from(e: QpsError) -> Self {
        let msg = e.to_string();
        match e {
            QpsError::Parse { .. }
            | QpsError::Config(_)
            | QpsError::Json(_)
            | QpsError::Io(_)
            | QpsError::InvalidParameter(_)
            | QpsError::DegenerateSampling(_)
            | QpsError::GridMismatch(_)
            | QpsError::EmptyBath
            | QpsError::Singularity
            | QpsError::UndefinedWeighting => CliError::Input(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

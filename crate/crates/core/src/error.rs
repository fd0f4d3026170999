use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling-weighted polarization is undefined: every spin has a_perp = 0")]
    UndefinedWeighting,

    #[error("bath is empty")]
    EmptyBath,

    #[error("point-dipole coupling is singular at r = 0")]
    Singularity,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("steady state not reached after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("multipulse gain regime invalid: eps = {0} (requires 0 < eps < 1)")]
    MultipulseRegime(f64),

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QpsError>;

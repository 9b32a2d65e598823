use thiserror::Error;

/// Errors raised by the geometry, solver, flow and I/O layers.
#[derive(Debug, Error)]
pub enum PcfError {
    #[error("reference density is not positive (min sigma0 = {min})")]
    NonPositiveDensity { min: f64 },

    #[error("bad grid: {0}")]
    BadGrid(String),

    #[error("field shape mismatch: expected {expected}, got {got}")]
    ShapeError { expected: String, got: String },

    #[error("potential leaves the Kähler cone (min rho = {min_rho}{})", stage_suffix(*.stage))]
    NotKahler { min_rho: f64, stage: Option<usize> },

    #[error("tridiagonal factorization broke down at row {row}")]
    SingularSolve { row: usize },

    #[error("Poisson residual {residual:e} exceeds tolerance {tol:e}")]
    ToleranceNotMet { residual: f64, tol: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(s) => format!(", stage {s}"),
        None => String::new(),
    }
}

impl PcfError {
    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        PcfError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PcfError>;

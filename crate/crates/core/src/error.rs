use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh construction, assembly, the solvers and the harness.
#[derive(Debug, Error)]
pub enum FslError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<FslError>,
    },

    #[error("no sign change in root bracket {n}")]
    RootFinding { n: usize },

    #[error("observed rate undefined: {0}")]
    UndefinedRate(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenNotConverged { iterations: usize },

    #[error("{0}")]
    Undefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FslError>;

pub(crate) fn invalid(msg: impl Into<String>) -> FslError {
    FslError::InvalidArgument(msg.into())
}

pub(crate) fn io_err(path: impl Into<PathBuf>, source: std::io::Error) -> FslError {
    FslError::Io {
        path: path.into(),
        source,
    }
}

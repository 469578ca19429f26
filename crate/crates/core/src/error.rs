use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("increment has {got} modes but the noise model has {expected}")]
    IncrementMismatch { expected: usize, got: usize },

    #[error("trajectory was recorded without per-step increments")]
    MissingIncrements,

    #[error("ground state solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("ground state iteration collapsed to the zero solution")]
    ZeroSolution,

    #[error("{invalid} of {total} ensemble paths failed numerically")]
    InvalidPaths { invalid: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems are reported before any computation starts.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidNoise(_)
                | Error::InvalidCoupling(_)
                | Error::InvalidArgument(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

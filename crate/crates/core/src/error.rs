use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AhrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AhrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Reducible chains, non-stochastic rows and the like.
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    /// The chain is well formed but outside the supported (reversible) class.
    #[error("unsupported chain: {0}")]
    UnsupportedChain(String),

    #[error("invalid error model: {0}")]
    InvalidModel(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl AhrError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AhrError::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AhrError::Io {
            path: path.into(),
            source,
        }
    }
}

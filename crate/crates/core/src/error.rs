use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::StepRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimension mismatch, index out of range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Finite-difference step collapsed: `theta ± eps*v` rounds back to `theta`.
    #[error("degenerate finite-difference step (eps = {eps:e})")]
    DegenerateStep { eps: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("run diverged at step {step}")]
    Diverged { step: u64, record: Box<StepRecord> },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite { context: context.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

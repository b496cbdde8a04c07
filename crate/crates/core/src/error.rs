use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient history: feature map needs {needed} delayed states, window has {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("series too short: need at least {needed} time steps, got {available}")]
    SeriesTooShort { needed: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("trajectory blew up at step {step} (|value| = {magnitude:e})")]
    BlowUp { step: usize, magnitude: f64 },

    #[error("singular normal equations: {0}")]
    SingularSystem(String),

    #[error("Lyapunov estimate did not converge: last-quarter drift {drift:.3} exceeds 10%")]
    NonConvergence { drift: f64 },

    #[error("incompatible experiment specs: {0}")]
    IncompatibleSpecs(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

use thiserror::Error;

use crate::estimator::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value showed up in an iterate or estimate. `partial`
    /// carries the trace up to (not including) the failing iteration when the
    /// error comes out of a full run.
    #[error("diverged at iteration {t}")]
    Divergence {
        t: usize,
        partial: Option<Box<Trace>>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

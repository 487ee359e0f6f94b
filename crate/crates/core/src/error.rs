use thiserror::Error;

/// Errors surfaced by the training laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad shapes, unknown names, out-of-range hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called in a state that does not allow it.
    #[error("usage error: {0}")]
    Usage(String),

    /// A NaN or infinity reached a place where it would poison the run.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

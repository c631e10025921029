use thiserror::Error;

/// Errors produced by the precoder-design routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed problem data: inconsistent dimensions, unknown ids, empty sets.
    #[error("invalid instance: {0}")]
    Instance(String),

    /// A computation produced or received non-finite values, or a matrix that
    /// should be positive definite was not.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Invalid algorithm configuration (tolerances, flags, unsupported kinds).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An algorithm precondition does not hold for the given data.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn instance(msg: impl Into<String>) -> Self {
        Error::Instance(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

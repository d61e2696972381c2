use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on sites, supports or shapes does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix function was asked for outside its domain (e.g. log of a negative eigenvalue).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("total dimension {dim} exceeds the cap of {cap}; raise the cap explicitly to proceed")]
    DimensionCap { dim: usize, cap: usize },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

use thiserror::Error;

/// Errors produced by the release pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation would materialize more entries than its guard allows.
    #[error("capacity exceeded: {what} needs {requested} entries (limit {limit})")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    /// Input data outside the unit cube or otherwise malformed.
    #[error("input domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Shapes of two inputs do not agree.
    #[error("mismatch: {0}")]
    Mismatch(String),

    /// The linear program solver failed to reach a certified status.
    #[error("solver: {0}")]
    Solver(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::Mismatch(msg.into())
}

//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with arguments violating its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid experiment or stream configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// IDX file has an unexpected magic number.
    #[error("idx parse error: bad magic number {found:#010x}, expected {expected:#010x}")]
    IdxBadMagic { expected: u32, found: u32 },

    /// IDX payload ended before the declared item count was read.
    #[error("idx parse error: truncated payload in {0}")]
    IdxTruncated(String),

    /// Image and label files declare different item counts.
    #[error("idx parse error: image count {images} does not match label count {labels}")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

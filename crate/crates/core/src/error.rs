//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed tabular input (ragged rows, empty input, bad cells).
    #[error("parse error: {0}")]
    Parse(String),

    /// Invalid or inconsistent schema configuration.
    #[error("schema error: {0}")]
    Schema(String),

    /// Invalid layout, augmentation, split, or probe configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Data violates a declared contract (unknown category, bad numeric, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Filesystem or codec failure, with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A built dataset failed an integrity check.
    #[error("dataset integrity: {0}")]
    Integrity(String),
}

impl Error {
    /// Wrap an I/O failure with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

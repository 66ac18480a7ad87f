use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("book {book_id}: no paragraphs after segmentation")]
    EmptyBook { book_id: String },

    #[error("series of length {len} is too short (need at least {need})")]
    TooShort { len: usize, need: usize },

    #[error("{path}: bad magic bytes")]
    BadMagic { path: PathBuf },

    #[error("{path}: format version {found} is not supported (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: truncated file ({len} bytes, expected {expected})")]
    Truncated {
        path: PathBuf,
        len: usize,
        expected: usize,
    },

    #[error("{path}: checksum mismatch")]
    Checksum { path: PathBuf },

    #[error("embedding backend: {0}")]
    Backend(String),

    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

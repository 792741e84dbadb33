use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(
        "bad magic: expected {:?}, found {:?}",
        expected.escape_ascii().to_string(),
        found.escape_ascii().to_string()
    )]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("patch {index} has L2 norm {norm}, expected 1 within {tolerance}")]
    NormViolation {
        index: usize,
        norm: f64,
        tolerance: f64,
    },

    #[error("mask byte {value} at index {index} is not 0 or 1")]
    InvalidMaskValue { index: usize, value: u8 },

    #[error("negative heat value {value} at index {index}")]
    NegativeHeat { index: usize, value: f32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid flow network: {0}")]
    InvalidNetwork(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

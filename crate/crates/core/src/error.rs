use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed post input. `location` is a byte offset for XML and a
    /// 1-based line number for JSONL.
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error("not a SOCV file")]
    NotSocv,

    #[error("unsupported SOCV version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated: {0}")]
    Truncated(String),

    #[error("corrupt SOCV file: {0}")]
    Corrupt(String),

    #[error("trailing bytes after {0} declared records")]
    TrailingData(u64),

    #[error("duplicate question id {0}")]
    DuplicateId(u64),

    #[error("zero vector for question id {0}")]
    ZeroVector(u64),

    #[error("non-finite component in vector for question id {0}")]
    NonFinite(u64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero-norm vector has no cosine similarity")]
    ZeroNorm,

    #[error("empty text")]
    EmptyText,

    #[error("graph floor too high for requested threshold: threshold {threshold} < stored floor {floor}")]
    GraphFloorTooHigh { threshold: f64, floor: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown question id {0}")]
    UnknownId(u64),

    #[error("partition does not match vectors: {0}")]
    PartitionMismatch(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(u64),
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Byte(b) => write!(f, "byte {b}"),
            Location::Line(l) => write!(f, "line {l}"),
        }
    }
}

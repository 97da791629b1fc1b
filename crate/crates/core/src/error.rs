use std::path::PathBuf;

use crate::otsl::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown OTSL token {character:?} at position {position}")]
    UnknownToken { position: usize, character: char },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid OTSL structure: {0}")]
    InvalidStructure(Violation),

    #[error("invalid grid {rows}x{cols}: rows and columns must both be at least 1")]
    BadGrid { rows: usize, cols: usize },

    #[error("index ({row}, {col}) out of bounds for a {rows}x{width} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        width: usize,
    },

    #[error("malformed HTML: {0}")]
    MalformedHtml(String),

    #[error("inconsistent table geometry: {0}")]
    InconsistentGeometry(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate record id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("record {id:?} is missing field {field}")]
    MissingField { id: String, field: &'static str },

    #[error("record {id:?}: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("no samples")]
    ZeroSamples,

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

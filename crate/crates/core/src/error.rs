use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid label {value:?} at row {row}")]
    InvalidLabel { row: usize, value: String },
    #[error("type mismatch in column {column:?} at row {row}: {value:?} is not numeric")]
    TypeMismatch {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column {0:?} declared in schema but missing from file")]
    MissingColumn(String),
    #[error("non-binary prediction {value:?} at line {line}")]
    NonBinaryPrediction { line: usize, value: String },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no antecedent meets support threshold {0}")]
    EmptyPool(usize),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty capture: objective undefined for a prefix capturing no example")]
    EmptyCapture,
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("mask splits equivalence group {0}")]
    GroupSplit(usize),
    #[error("no black-box source available for uncaptured example {0}")]
    MissingBlackBox(usize),
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Infeasible,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::SchemaVersion { .. } | Error::MissingBlackBox(_) => ErrorKind::Config,
            Error::Infeasible(_) => ErrorKind::Infeasible,
            _ => ErrorKind::Data,
        }
    }
}

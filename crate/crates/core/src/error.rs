use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotoneTimestamp { prev: f64, t: f64 },

    #[error("invalid severity index {0}")]
    InvalidSeverity(i64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed window: {0}")]
    Window(String),

    #[error("class {0} has no support; cannot derive class weights")]
    EmptyClass(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("weight file: {0}")]
    WeightFormat(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

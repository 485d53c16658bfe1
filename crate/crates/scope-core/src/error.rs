//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate batch: all sample weights are zero")]
    DegenerateBatch,

    #[error("training diverged: non-finite value in {0}")]
    TrainingDiverged(&'static str),

    #[error("cosine similarity undefined for zero-norm vector")]
    UndefinedSimilarity,

    #[error("class {0} has fewer than 2 members; density stats undefined")]
    StatsUndefined(usize),

    #[error("split error: {0}")]
    Split(String),

    #[error("parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("run aborted at EM iteration {iteration}: {reason}")]
    RunAborted { iteration: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("empty log")]
    EmptyLog,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema mismatch for {artifact}: expected {expected}, found {found}")]
    Schema {
        artifact: String,
        expected: String,
        found: String,
    },

    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no classes survive filtering")]
    NoClassesSurvive,

    #[error("too few instances: {0}")]
    TooFewInstances(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad inputs or configuration rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Schema { .. } | Error::DimensionMismatch { .. }
        )
    }
}

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("row {row}: {message}")]
    CsvRow { row: usize, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("path index: {0}")]
    Path(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("exact branch probabilities are not available for this classifier")]
    ExactQUnavailable,

    #[error("enumeration over {stages} stages exceeds the cap of {cap}")]
    EnumerationCap { stages: usize, cap: usize },

    #[error("round {round}: {source}")]
    Learner {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model: {0}")]
    Model(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

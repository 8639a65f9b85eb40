use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AlexError>;

#[derive(Debug, Error)]
pub enum AlexError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown edit id {0}")]
    UnknownEdit(usize),

    #[error("memory has no clusters yet")]
    NotClustered,

    #[error("no adaptation trigger fired")]
    NoTrigger,

    #[error("every candidate question was rejected by the filter")]
    AllQuestionsRejected,

    #[error("unsupported index version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("malformed index at line {line}: {reason}")]
    MalformedIndex { line: usize, reason: String },

    #[error("malformed input at {path}:{line}: {reason}")]
    MalformedInput {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("missing prediction for record {0}")]
    MissingPrediction(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AlexError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AlexError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error originates from the embedding / generation provider.
    pub fn is_provider(&self) -> bool {
        matches!(self, AlexError::Provider(_))
    }
}

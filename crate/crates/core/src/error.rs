use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate utterance index {index} in conversation {conversation_id:?}")]
    DuplicateIndex { conversation_id: String, index: i64 },

    #[error("record error at {location}: {message}")]
    Record { location: String, message: String },

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("degenerate embedding: {0}")]
    Degenerate(String),

    #[error("SVD did not converge after {steps} steps (max residual {residual:.3e}, tolerance {tolerance:.1e})")]
    NoConvergence {
        steps: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("model format version {found} is not supported (expected major version {expected})")]
    ModelVersion { found: String, expected: u32 },

    #[error("model invariant violated: {0}")]
    ModelInvariant(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

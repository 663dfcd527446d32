use std::path::PathBuf;

/// Errors produced anywhere in the clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("count mismatch {titles} vs {labels}")]
    CountMismatch { titles: usize, labels: usize },

    #[error("not an embedding file")]
    BadMagic,

    #[error("truncated payload")]
    TruncatedPayload,

    #[error("non-finite value in row {row}")]
    NonFiniteRow { row: usize },

    #[error("cannot augment empty text")]
    EmptyText,

    #[error("zero vector in cosine")]
    ZeroVectorCosine,

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("empty soft cluster {cluster}")]
    EmptySoftCluster { cluster: usize },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite {what}")]
    NonFinite { what: String },

    #[error("invalid {name}: {reason}")]
    InvalidArgument { name: String, reason: String },

    #[error("training diverged at epoch {epoch}: {what} is not finite")]
    Diverged { epoch: usize, what: String },

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(
        what: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

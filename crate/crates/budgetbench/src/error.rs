use std::path::PathBuf;

/// Errors surfaced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed JSON: {source}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}:{line}: duplicate record id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}:{line}: {msg}")]
    InvalidRecord {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("benchmark has no records")]
    EmptyBenchmark,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Cholesky factorization failed; increase hessian damping")]
    CholeskyFailure,

    #[error("tensor file error: {0}")]
    TensorFormat(String),

    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("server response missing field: {0}")]
    NonConformingServer(String),

    #[error("judge verdict not in grammar: {0:?}")]
    JudgeError(String),

    #[error("no throughput entry for model {model:?} on dataset {dataset:?}")]
    MissingThroughput { model: String, dataset: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate passage id {0:?}")]
    DuplicatePassage(String),

    #[error("duplicate qid {0:?}")]
    DuplicateQid(String),

    #[error("passage {0:?} has empty text after normalization")]
    EmptyPassage(String),

    #[error("labels reference unknown passages: {}", .0.join(", "))]
    UnresolvedGold(Vec<String>),

    #[error("label {qid}: span text {span:?} does not equal answer {answer:?}")]
    SpanMismatch {
        qid: String,
        span: String,
        answer: String,
    },

    #[error("invalid label {qid}: {message}")]
    InvalidLabel { qid: String, message: String },

    #[error("negatives for {qid} violate training-record invariants: {message}")]
    InvalidNegatives { qid: String, message: String },

    #[error("qid {0:?} is not in the dataset")]
    UnknownQid(String),

    #[error("unknown passage id {0:?}")]
    UnknownPassage(String),

    #[error("cannot build an index over an empty passage store")]
    EmptyStore,

    #[error("k must be at least 1")]
    InvalidK,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in embedding")]
    NonFiniteEmbedding,

    #[error("embedder failed on passage {passage_id:?}: {message}")]
    Embedding { passage_id: String, message: String },

    #[error("every reader call failed ({0} passages)")]
    AllReadersFailed(usize),

    #[error("adapter {adapter}: {message}")]
    Adapter { adapter: String, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("datasets reference different passage stores ({0} vs {1})")]
    StoreMismatch(String, String),

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("{0}")]
    Metric(String),

    #[error("{failed} of {total} questions failed during evaluation")]
    TooManyFailures { failed: usize, total: usize },

    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("json: {0}")]
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

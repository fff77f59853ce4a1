use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the detection pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid timestamp {value:?}: expected ISO-8601 (e.g. 2019-10-20T16:15:00Z)")]
    Timestamp { value: String },

    #[error(
        "stream is not sorted by timestamp: record {position} (id {id:?}) at {timestamp} precedes the record before it"
    )]
    UnsortedStream {
        position: usize,
        id: String,
        timestamp: String,
    },

    #[error("record {id:?} at {timestamp} precedes the stream start {stream_start}")]
    BeforeStreamStart {
        id: String,
        timestamp: String,
        stream_start: String,
    },

    #[error("window length must be positive")]
    NonPositiveWindow,

    #[error("cannot normalize zero vector for token {token:?}")]
    ZeroVector { token: String },

    #[error("cannot compute cosine distance: {0} vector has zero norm")]
    ZeroNorm(&'static str),

    #[error("vector for token {token:?} has dimension {actual}, expected {expected}")]
    DimensionMismatch {
        token: String,
        expected: usize,
        actual: usize,
    },

    #[error("clustering requires at least one token")]
    EmptyClustering,

    #[error("token {token:?} is not a leaf of the dendrogram")]
    UnknownLeaf { token: String },

    #[error("invalid dendrogram: {0}")]
    InvalidDendrogram(String),

    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),

    #[error("similarity matrices are built over different vocabularies")]
    VocabularyMismatch,

    #[error("detection needs at least two windows, got {0}")]
    TooFewWindows(usize),

    #[error("expected one embedding model per window ({windows}), got {models}")]
    ModelCountMismatch { windows: usize, models: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ground truth: {0}")]
    GroundTruth(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

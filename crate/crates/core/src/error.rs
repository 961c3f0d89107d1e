use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("label {label} of node {node} outside class range 0..{classes}")]
    LabelOutOfRange { node: usize, label: usize, classes: usize },

    #[error("node {0} has no label")]
    MissingLabel(usize),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enhanced pair ({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),

    #[error("train split is empty")]
    EmptyTrainSplit,

    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),

    #[error("empty node text for prompt rendering")]
    EmptyContent,

    #[error("query budget exhausted: {requested} pairs requested, {remaining} remaining")]
    BudgetExhausted { requested: usize, remaining: usize },

    #[error("provider error after {attempts} attempts: {message}")]
    Provider { attempts: u32, message: String },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("bad embeddings file {path}: {reason}")]
    EmbeddingsFormat { path: PathBuf, reason: String },

    #[error("bad cache file {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error("bad dataset: {0}")]
    Dataset(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

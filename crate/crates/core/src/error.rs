use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("document {doc_id} has no terms after analysis")]
    EmptyVector { doc_id: String },

    #[error("cosine similarity undefined for zero-norm vector {doc_id}")]
    ZeroNorm { doc_id: String },

    #[error(
        "span {start}..{end} is out of range or not on a character boundary (text length {len})"
    )]
    InvalidSpan {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary size {vocab_size} cannot hold {required} special and alphabet tokens")]
    VocabTooSmall { vocab_size: usize, required: usize },

    #[error("document {doc_id} has no date but date-matched labeling was requested")]
    MissingDate { doc_id: String },

    #[error("document {doc_id} has no patient reference")]
    MissingPatient { doc_id: String },

    #[error("no label reaches the required test support of {min_test_support}")]
    EmptyTask { min_test_support: usize },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("study has no complete trial")]
    NoCompleteTrial,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

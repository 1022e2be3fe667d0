use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate article id {0:?}")]
    DuplicateId(String),

    #[error("unknown label {label:?} at line {line}")]
    UnknownLabel { line: usize, label: String },

    #[error("unknown party {party:?} at line {line}")]
    UnknownParty { line: usize, party: String },

    #[error("corpus has {0} domain(s); a media split needs at least 2")]
    TooFewDomains(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("beta {0} is outside [0, 1]")]
    BetaOutOfRange(f64),

    #[error("no wiki cache entry for domain {0:?}")]
    CacheMiss(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("cannot load backbone {0:?}")]
    BackboneLoad(String),

    #[error("missing resource: {what} (run `{hint}` first)")]
    ResourceMissing { what: String, hint: String },

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("invalid embedding model at line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn missing(what: impl Into<String>, hint: impl Into<String>) -> Self {
        Error::ResourceMissing {
            what: what.into(),
            hint: hint.into(),
        }
    }
}

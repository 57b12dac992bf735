//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid UTF-8 on line {line}")]
    Encoding { line: usize },

    #[error("unknown part-of-speech tag {tag:?} on line {line}")]
    UnknownTag { tag: String, line: usize },

    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no part-of-speech tri-grams could be formed")]
    NoTriples,

    #[error("profiles of different kinds cannot be compared")]
    MixedKinds,

    #[error("duplicate language code {0:?}")]
    DuplicateLanguage(String),

    #[error("distance matrices cover different languages")]
    LabelMismatch,

    #[error("at least {needed} languages are required, got {got}")]
    TooFewLabels { needed: usize, got: usize },

    #[error("all pairwise distances are equal; z-scores are undefined")]
    ZeroVariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("class {label:?} has {rows} rows, fewer than the {folds} folds requested")]
    TooFewRowsPerClass {
        label: String,
        rows: usize,
        folds: usize,
    },

    #[error("confusion matrix is empty")]
    EmptyConfusion,

    #[error("input has no tri-grams known to the model")]
    NoUsableTriples,

    #[error("model file is invalid: {0}")]
    ModelFormat(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Wraps the error with a short description of what was being processed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of numeric computation rather than bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::ZeroVariance | Error::NonFinite(_))
    }
}

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("vocabulary/model mismatch: {0}")]
    VocabMismatch(String),

    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("malformed {what} at line {line}: {detail}")]
    Malformed { what: String, line: usize, detail: String },

    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    /// A checkpoint does not fit the vocabularies or model it is loaded into.
    Mismatch,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numerical,
            Error::InvalidArgument(_) | Error::Config(_) => ErrorKind::Usage,
            Error::VocabMismatch(_) => ErrorKind::Mismatch,
            _ => ErrorKind::Data,
        }
    }

    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Empty(_) => "empty",
            Error::TokenOutOfRange { .. } => "token_out_of_range",
            Error::UnknownNode(_) => "unknown_node",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::VocabMismatch(_) => "vocab_mismatch",
            Error::Diverged { .. } => "diverged",
            Error::Malformed { .. } => "malformed",
            Error::File { source, .. } if source.kind() == io::ErrorKind::NotFound => "missing_file",
            Error::File { .. } | Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File { path: path.into(), source }
    }
}

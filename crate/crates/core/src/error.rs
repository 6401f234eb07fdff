//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape mismatch, bad rate, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data is unusable (empty signal, zero-length time axis, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called in the wrong lifecycle state.
    #[error("state error: {0}")]
    State(String),

    #[error("invalid annotation at sample {sample}: {reason}")]
    InvalidAnnotation { sample: usize, reason: String },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("split infeasible: {0}")]
    SplitInfeasible(String),

    #[error("corrupt file {path}: {reason} (offset {offset})")]
    Corrupt { path: PathBuf, offset: u64, reason: String },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    UnsupportedVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

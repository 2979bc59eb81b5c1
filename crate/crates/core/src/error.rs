use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("duplicate passage id {0}")]
    DuplicatePassage(u32),

    #[error("unknown passage id {0}")]
    UnknownPassage(u32),

    #[error("span {start}..{end} out of bounds for text of {len} characters")]
    OutOfBounds { start: usize, end: usize, len: usize },

    #[error("instance {instance_id}: answer offsets {start}..{end} do not align with token boundaries")]
    Misaligned { instance_id: u64, start: usize, end: usize },

    #[error("target position {0} is a padding position")]
    TargetAtPad(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64, trace: Vec<(usize, f64)> },

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid {what} file: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

use std::path::PathBuf;

use crate::engine::KeyTag;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operands belong to different contexts ({left} vs {right})")]
    ContextMismatch { left: u64, right: u64 },
    #[error("key mismatch: expected {expected}, found {found}")]
    KeyMismatch { expected: KeyTag, found: KeyTag },
    #[error("unknown key {0}")]
    UnknownKey(KeyTag),
    #[error("{op} needs level >= 1, operand is at level {level}")]
    LevelExhausted { op: &'static str, level: u32 },
    #[error("collective operation is missing parties {0:?}")]
    MissingParties(Vec<u16>),
    #[error("party {0} is not in the roster")]
    UnknownParty(u16),
    #[error("{len} values exceed capacity of {slots} slots")]
    Capacity { len: usize, slots: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("input outside the valid domain: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {msg}")]
    Csv { path: PathBuf, msg: String },
    #[error("malformed frame: {0}")]
    Wire(String),
    #[error("round {round} timed out waiting for parties {missing:?}")]
    RoundTimeout { round: u32, missing: Vec<u16> },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unknown operation {0:?}")]
    UnknownOp(String),
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

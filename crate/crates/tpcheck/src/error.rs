use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("direction mismatch: {0}")]
    DirectionMismatch(String),

    #[error("hypothesis {clause} violated: {detail}")]
    Hypothesis { clause: &'static str, detail: String },

    #[error("state space bound exceeded: {0}")]
    BoundExceeded(String),

    #[error("no cutoff available: {0}")]
    NoCutoff(String),

    #[error("corrupt global state: {0}")]
    CorruptState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

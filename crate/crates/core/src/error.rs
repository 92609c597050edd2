use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("index {index} out of range for log of {len} interactions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid position: {0}")]
    InvalidPosition(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("inconsistent seating state: {0}")]
    InconsistentState(String),

    #[error("observation ({interaction}, {slot}) is not seated")]
    NotSeated { interaction: usize, slot: usize },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no qualifying interactions for pair ({0}, {1})")]
    NoQualifyingInteractions(String, String),

    #[error("line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("instance too large for exhaustive search: {items} items (limit {limit})")]
    TooLarge { items: usize, limit: usize },

    #[error("agent {agent_id}: fewer than 2 feasible members after {attempts} population draws")]
    SeedingFailure { agent_id: usize, attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed {file}: {reason}")]
    Malformed { file: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

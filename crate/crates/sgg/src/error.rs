//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SggError {
    /// Invalid configuration or incompatible arguments. Maps to exit code 2
    /// in the CLI.
    #[error("config error: {0}")]
    Config(String),

    #[error("missing embedding for word '{0}'")]
    MissingEmbedding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Sample generation failed (e.g. placement retries exhausted). The
    /// caller is expected to skip the offending seed.
    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SggError {
    /// CLI exit code for this error: 2 for config errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SggError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SggError>;

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::llm::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the screening pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },

    #[error("integrity error: {message} ({})", .paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Integrity {
        message: String,
        paths: Vec<PathBuf>,
    },

    #[error("validation failed: {message}")]
    Validation {
        message: String,
        fields: BTreeMap<String, String>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn integrity(message: impl Into<String>, paths: Vec<PathBuf>) -> Self {
        Error::Integrity {
            message: message.into(),
            paths,
        }
    }

    pub fn validation(message: impl Into<String>, field: &str, detail: impl Into<String>) -> Self {
        let mut fields = BTreeMap::new();
        fields.insert(field.to_string(), detail.into());
        Error::Validation {
            message: message.into(),
            fields,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 stage failure, 4 integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Validation { .. } => 2,
            Error::Integrity { .. } => 4,
            _ => 3,
        }
    }
}

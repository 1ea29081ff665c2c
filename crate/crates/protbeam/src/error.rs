use std::io;

use protbeam_core::Error as CoreError;

/// Failure classes of the command-line driver, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("retry budget exhausted: {0}")]
    Exhausted(String),
    #[error("scorer error: {0}")]
    Scorer(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Provider(_) => 3,
            AppError::Exhausted(_) => 4,
            AppError::Scorer(_) => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ProviderUnavailable(_) | CoreError::InvalidResponse(_) | CoreError::AlphabetMismatch { .. } => {
                AppError::Provider(e.to_string())
            }
            CoreError::ScorerFailure { .. } => AppError::Scorer(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        AppError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Config(format!("tsv: {e}"))
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Config(format!("json: {e}"))
    }
}

pub type AppResult<T> = Result<T, AppError>;

//! File formats, parallel execution and the `rjar` command line on top of
//! [`rjar_core`].

pub mod cli;
pub mod io;
pub mod output;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] rjar_core::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("row {row}, column '{column}': cannot read '{cell}' as a finite number")]
    Parse { row: usize, column: String, cell: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl AppError {
    /// Machine-readable reason printed before the message on failure.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::Schema(_) => "SCHEMA",
            AppError::Parse { .. } => "PARSE",
            AppError::Io { .. } => "IO",
            AppError::Csv(_) => "CSV",
            AppError::Json(_) => "JSON",
            AppError::Usage(_) => "USAGE",
            AppError::Threads(_) => "THREADS",
        }
    }

    /// 1 for usage errors, 2 for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            _ => 2,
        }
    }
}

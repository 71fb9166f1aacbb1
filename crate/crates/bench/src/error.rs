use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("ParseError: {path}: {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("DimensionError: {path}: {message}")]
    Dimension { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    /// Bad flags or configuration; reported with exit code 2.
    #[error("{0}")]
    Usage(String),

    #[error("AuditError: {0}")]
    Audit(String),

    #[error(transparent)]
    Solver(#[from] fmbs_core::Error),
}

impl BenchError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use fmbs_core::Error as Core;
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Solver(
                Core::Budget { .. } | Core::InvalidSpec(_) | Core::TooLarge { .. },
            ) => 2,
            BenchError::Solver(_) | BenchError::Audit(_) => 3,
            BenchError::Parse { .. } | BenchError::Dimension { .. } | BenchError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

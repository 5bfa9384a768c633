use std::path::PathBuf;

use pdr_core::PdrError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file {}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Solver(#[from] PdrError),
    #[error("{failed} selftest suite(s) failed")]
    Selftest { failed: usize },
}

impl BenchError {
    /// Process exit status: 1 configuration, 2 I/O, 3 selftest.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Solver(_) => 1,
            BenchError::Io { .. } | BenchError::Format { .. } => 2,
            BenchError::Selftest { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

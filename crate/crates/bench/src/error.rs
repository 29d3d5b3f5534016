//! Errors raised by the harness and their process exit codes.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    /// A malformed or out-of-range configuration entry; `line` is 1-based, 0 when not tied to a line.
    #[error("{}", config_message(*.line, .msg))]
    Config { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Solver(#[from] sca_core::Error),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("trace invariant violated: {0}")]
    Trace(String),
}

fn config_message(line: usize, msg: &str) -> String {
    if line == 0 {
        format!("config: {msg}")
    } else {
        format!("config line {line}: {msg}")
    }
}

impl BenchError {
    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        BenchError::Config { line, msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// 2 for configuration errors, 3 for violated solver contracts or invariants, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config { .. } | BenchError::Solver(sca_core::Error::Config(_)) => 2,
            BenchError::Solver(sca_core::Error::Contract(_) | sca_core::Error::Invariant(_)) | BenchError::Trace(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

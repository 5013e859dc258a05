use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration value violates an invariant. `field` is a
    /// dotted/indexed path such as `trans[1]` or `cov[0]`.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed table file. `line` is 1-based.
    #[error("{path}:{line}: {reason}")]
    Table {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("table version mismatch in {path}: file has version {found}, this build reads version {expected}")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("lookup table has no entry for t={t}, belief index {belief}")]
    MissingEntry { t: usize, belief: usize },

    #[error("{method} failed during {stage}: {reason}")]
    Solver {
        method: String,
        stage: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code used by the command-line harness: 1 for configuration and
    /// input problems, 2 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver { .. } | Error::MissingEntry { .. } => 2,
            _ => 1,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("referential error: {0}")]
    Referential(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid pair at index {index}: {message}")]
    InvalidPair { index: usize, message: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("SMO did not converge after {iterations} iterations (duality gap estimate {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("training diverged: {0}; try a smaller learning rate")]
    Divergence(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing upstream artifact {0}")]
    Dependency(PathBuf),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Convergence { .. } | Error::Divergence(_) | Error::Numeric(_) => {
                ErrorClass::Numeric
            }
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}

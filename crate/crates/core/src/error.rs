use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Snapshot of the optimizer state at the moment a run was aborted.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AbortContext {
    pub iteration: usize,
    pub memory: usize,
    pub stored_pairs: usize,
}

impl std::fmt::Display for AbortContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iteration {}, m_k = {}, q_k = {}",
            self.iteration, self.memory, self.stored_pairs
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("cannot draw {count} distinct indices from a population of {population}")]
    Sampling { count: usize, population: usize },

    #[error("invalid config `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid batch: {0}")]
    Batch(String),

    /// Raised by objectives; the optimizers rewrap it as [`Error::Numeric`].
    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("non-finite {what} ({context})")]
    Numeric { what: &'static str, context: AbortContext },

    #[error("corrupt curvature store: pair {index} has rho = {rho}")]
    CorruptStore { index: usize, rho: f64 },

    #[error("{path}:{line}: {reason}")]
    Data { path: PathBuf, line: usize, reason: String },

    #[error("dataset not found: {}", .0.display())]
    DatasetNotFound(PathBuf),

    #[error("metric undefined: {0}")]
    Metric(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

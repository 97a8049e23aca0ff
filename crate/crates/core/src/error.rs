use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("LP solver failed on column {column}: {reason}")]
    Solver { column: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate labels in dataset {dataset}: {reason}")]
    DegenerateLabels { dataset: usize, reason: String },

    #[error("unknown dataset {0}")]
    UnknownDataset(usize),

    #[error("too many failed bootstrap replicates: {failed} of {total}")]
    EnsembleFailures { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable short name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Dimension(_) => "dimension",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Solver { .. } => "solver",
            Error::Numerical(_) => "numerical",
            Error::DegenerateLabels { .. } => "degenerate_labels",
            Error::UnknownDataset(_) => "unknown_dataset",
            Error::EnsembleFailures { .. } => "ensemble_failures",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidParameter(format!($($arg)*))
    };
}
pub(crate) use invalid;

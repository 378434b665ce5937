use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the super-resolution library.
///
/// Every variant carries a short category (see [`Error::category`]) that the
/// CLI prints as the machine-parsable prefix of its error line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("coverage error: pixel ({row}, {col}) is not covered by any patch")]
    Coverage { row: usize, col: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("registration error: {0}")]
    Registration(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {message}")]
    Codec { path: PathBuf, message: String },
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Parameter(_) => "parameter",
            Error::Coverage { .. } => "coverage",
            Error::Numeric(_) => "numeric",
            Error::Registration(_) => "registration",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Codec { .. } => "codec",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

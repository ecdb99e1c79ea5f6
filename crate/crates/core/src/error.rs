use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Model specification or configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data does not satisfy the model's requirements.
    #[error("data error: {0}")]
    Data(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// A parameter value is outside its domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("simulated likelihood is zero for individual {id}")]
    ZeroLikelihood { id: String },

    #[error("initialization error in block {block}: {message}")]
    Initialization { block: String, message: String },

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::ZeroLikelihood { .. } | Error::Initialization { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse { path: path.into(), message: message.to_string() }
    }
}

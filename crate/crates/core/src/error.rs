use thiserror::Error;

/// Failures raised by the numerical kernels and the configuration layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The Riccati equation has no stabilizing solution for the given model.
    #[error("no stabilizing Riccati solution: {0}")]
    NoSolution(String),

    #[error("Riccati solution is indefinite (min eigenvalue {min_eigenvalue:e}, norm {norm:e})")]
    Indefinite { min_eigenvalue: f64, norm: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

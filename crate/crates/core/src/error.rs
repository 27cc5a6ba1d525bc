use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e} < -{tol:e}")]
    NotPositiveSemidefinite { min_eig: f64, tol: f64 },

    #[error("extended regime K = {k} rejected: {reason}")]
    ExtendedRegimeRejected { k: f64, reason: String },

    #[error("Cholesky factorization failed after {escalations} jitter escalations (last jitter {jitter:e})")]
    FactorizationFailed { escalations: u32, jitter: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. }
                | Error::ExtendedRegimeRejected { .. }
                | Error::FactorizationFailed { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

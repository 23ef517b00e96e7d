use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain")]
    Domain { point: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("regularity condition violated: {0}")]
    Regularity(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("jet test failed: {0}")]
    Jet(String),

    #[error("involutivity condition violated: {reason}")]
    Involutivity { reason: String, sample: Vec<f64> },

    #[error("degenerate base point: {0}")]
    Degeneracy(String),

    #[error("no convergence: {reason}")]
    Nonconvergence { reason: String, residuals: Vec<f64> },

    #[error("corrector failure: {0}")]
    Corrector(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("size guard: {0}")]
    Size(String),

    #[error("grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn regularity(msg: impl Into<String>) -> Self {
        Error::Regularity(msg.into())
    }

    pub(crate) fn nonconvergence(reason: impl Into<String>, residuals: Vec<f64>) -> Self {
        Error::Nonconvergence {
            reason: reason.into(),
            residuals,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

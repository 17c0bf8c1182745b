//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("evaluation too close to a pole: {0}")]
    NearPole(String),
    #[error("ill-conditioned configuration: {0}")]
    IllConditioned(String),
    #[error("contour validation failed: {0}")]
    Contour(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("state space too large: {0}")]
    TooLarge(String),
    #[error("simulation window too small: {0}")]
    Window(String),
}

impl Error {
    /// True for failures caused by unreachable accuracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A finite-difference stencil left the grid.
    #[error("boundary error: {0}")]
    Boundary(String),
    /// Invalid configuration (grid, schedule, CFL, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A step of an iteration failed one of its checks.
    #[error("step error: {0}")]
    Step(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

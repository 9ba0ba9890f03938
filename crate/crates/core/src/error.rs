use thiserror::Error;

/// Failure classes shared by every module of the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid or inconsistent input (lengths, regions, dimensions, grids).
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine could not deliver a trustworthy answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Input is well-formed but lies on a degenerate set (e.g. a critical point of a weight).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

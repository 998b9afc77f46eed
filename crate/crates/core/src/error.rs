use thiserror::Error;

/// Errors produced by the typesize library.
#[derive(Debug, Error)]
pub enum Error {
    /// A family, lattice or Markov description is malformed or violates an invariant.
    #[error("spec error: {0}")]
    Spec(String),
    /// The input violates the preconditions of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An enumeration or sampling budget would be exceeded.
    #[error("resource error: {what} requires {needed}, budget is {budget}")]
    Resource {
        what: String,
        needed: String,
        budget: String,
    },
    /// A container could not be decoded.
    #[error("corrupt input: {0}")]
    Corrupt(String),
    /// The structured-text document could not be parsed.
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn spec<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Spec(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A message index is not below `2^k`.
    #[error("message {message} out of range for k = {k}")]
    InvalidMessage { message: u128, k: u32 },
    /// A matrix is not a member of the codebook.
    #[error("not a codeword: {0}")]
    NotACodeword(String),
    /// The codebook is too large to materialize.
    #[error("codebook with k = {k} exceeds the enumeration limit k <= {limit}")]
    CapacityExceeded { k: u32, limit: u32 },
    /// A pairwise quantity was requested for two identical codewords.
    #[error("pairwise error probability needs two distinct codewords")]
    InvalidPair,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

use thiserror::Error;

/// Errors raised by models, trees, drafting and decoding.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("token {token} is outside the vocabulary of size {vocab_size}")]
    TokenOutOfVocab { token: u32, vocab_size: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("malformed draft tree: {0}")]
    Structure(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

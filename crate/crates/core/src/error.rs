use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("not invertible: gcd {gcd} with modulus {modulus}")]
    NotInvertible { gcd: String, modulus: String },
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("plaintext out of range: {0}")]
    PlaintextRange(String),
    #[error("parameter generation failed: {0}")]
    ParameterGeneration(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("blinding state already consumed")]
    StateConsumed,
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("registry: {0}")]
    Registry(String),
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bandit setup: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("no sample fell into the requested data range")]
    EmptyHistogram,
}

pub type Result<T> = std::result::Result<T, Error>;

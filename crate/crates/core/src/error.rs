use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("site {site} is empty")]
    EmptySite { site: usize },
    #[error("not a probability vector: {0}")]
    NotProbability(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{family} recurrence overflowed at index {index}")]
    Overflow { family: &'static str, index: i64 },
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("state space has {states} states, limit is {limit}")]
    TooLarge { states: u128, limit: u128 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("adaptive step {step:e} underflowed at t = {time}")]
    StepSizeUnderflow { time: f64, step: f64 },
    #[error("cross-check failed: {0}")]
    CheckFailed(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

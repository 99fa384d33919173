use thiserror::Error;

/// Everything that can go wrong inside the core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must be non-negative, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("value {value} outside [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("expected a {expected} function, got a {found} function")]
    WrongRole { expected: &'static str, found: &'static str },
    #[error("assumption violated: {0}")]
    Assumption(&'static str),
    #[error("agents of type {0} do not share a common state")]
    NotLockstep(usize),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("state has {found} agents, population has {expected}")]
    SizeMismatch { expected: usize, found: usize },
}

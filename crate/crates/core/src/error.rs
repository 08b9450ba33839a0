use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state n = {n} is not bound (largest bound index is {n_max})")]
    UnboundState { n: usize, n_max: usize },

    #[error("accuracy error at (x = {x}, p = {p}): {reason}")]
    Accuracy { x: f64, p: f64, reason: String },

    #[error("requested p-derivative order {order} exceeds the configured limit {limit}")]
    OrderLimit { order: usize, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient coverage: {masked} of {total} cells masked")]
    InsufficientCoverage { masked: usize, total: usize },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid restriction: r = {r} exceeds polynomial degree p = {p} (or the maximum of 2)")]
    InvalidRestriction { p: usize, r: usize },

    #[error("underdetermined restriction system: lag window C = {lag_window} is too short for r = {r}")]
    Underdetermined { lag_window: usize, r: usize },

    #[error("insufficient high-frequency history: first usable low-frequency period is {first_usable}, but only {available} periods carry a response")]
    Alignment { first_usable: usize, available: usize },

    #[error("distribution domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("degenerate signal: the systematic component has zero variance")]
    DegenerateSignal,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            iteration: 0,
            message: message.into(),
        }
    }

    /// Attach the sampler iteration to a numerical error; other variants pass through.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Numerical { message, .. } => Error::Numerical { iteration, message },
            other => other,
        }
    }
}

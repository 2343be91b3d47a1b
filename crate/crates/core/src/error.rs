use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// An angular derivative was requested at theta = 0 or theta = pi.
    #[error("angular derivative undefined at the pole (theta = {theta})")]
    Pole { theta: f64 },

    #[error("underdetermined fit: {samples} samples for {coefficients} coefficients")]
    Underdetermined { samples: usize, coefficients: usize },

    #[error("ill-conditioned design matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("degenerate pattern: {0}")]
    DegeneratePattern(String),

    #[error("{ports} ports cannot identify {unknowns} unknowns")]
    NotIdentifiable { ports: usize, unknowns: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True when the error stems from bad user input rather than a failure
    /// while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NonFinite(_) | Error::IllConditioned(_))
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operation has no meaningful value at the given point (typically the origin).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver stopped without meeting its tolerance. `bracket` is the
    /// last interval known to contain the root.
    #[error("numerical failure: {message} (last bracket [{}, {}])", bracket.0, bracket.1)]
    NumericalFailure {
        message: String,
        bracket: (f64, f64),
    },

    #[error("synthesis failure: {0}")]
    SynthesisFailure(String),

    /// Integration produced a non-finite state at time `time`.
    #[error("trajectory diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

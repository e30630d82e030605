use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Measured quantities contradict each other (e.g. a loss budget whose
    /// parts exceed the total).
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    /// A frequency or time grid does not cover the requested support.
    #[error("grid error: {0}")]
    Grid(String),

    /// A least-squares fit could not be carried out.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Time tags are expected sorted but were not.
    #[error("unsorted stream: {0}")]
    Unsorted(String),

    #[error("empty stream: {0}")]
    EmptyStream(String),

    /// Timestamps left the 64-bit picosecond range.
    #[error("timestamp overflow: {0}")]
    Overflow(String),

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error stems from bad input rather than a numerical
    /// failure inside an otherwise valid computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Inconsistent(_)
                | Error::Unsorted(_)
                | Error::EmptyStream(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

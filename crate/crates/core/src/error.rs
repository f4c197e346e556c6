use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Gram-Schmidt kept producing (near) dependent columns.
    #[error("degenerate Gram-Schmidt input after {attempts} resampling attempts")]
    DegenerateInput { attempts: usize },

    #[error("Hessian is numerically singular (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite iterate at step {step}")]
    NumericFailure { step: usize },

    #[error("time {t} outside trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("trajectory spans {span} which is shorter than the window length {window}")]
    InsufficientSpan { span: f64, window: f64 },

    #[error("run did not complete (diverged at step {step})")]
    NotCompleted { step: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

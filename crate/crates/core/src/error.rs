use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{family} parameter {value} outside {range}")]
    OutOfRange {
        family: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("derivative undefined at turning point")]
    DerivativeUndefined,

    #[error("escaping initial point {0}")]
    EscapingPoint(f64),

    /// A symbol within the first few positions could not be trusted.
    /// The bracket is the slope interval reached before giving up.
    #[error("insufficient precision: ambiguous symbol at index {index} (slope bracket [{lo}, {hi}])")]
    InsufficientPrecision { index: usize, lo: f64, hi: f64 },

    #[error("derivative along orbit vanishes (critical hit at index {0})")]
    CriticalHit(usize),

    #[error("derivative undefined beyond index {0}")]
    ZeroHit(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("not resolved: {0}")]
    NotResolved(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

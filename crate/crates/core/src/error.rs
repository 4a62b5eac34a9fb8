use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("unstable symbol: {0}")]
    UnstableSymbol(String),

    #[error("kernel has no Fourier symbol")]
    NoSymbol,

    #[error("kernel tail mass {mass:e} exceeds truncation budget {budget:e}")]
    TruncationBudgetExceeded { mass: f64, budget: f64 },

    #[error("time {0} is not a sampled time of the tabulated kernel")]
    UnsampledTime(f64),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("action range unbounded: {0}")]
    ActionRangeUnbounded(String),

    #[error("implicit denominator 1 + ds/2 V(x) vanishes at x = {x}")]
    ImplicitDenominatorVanishes { x: f64 },

    #[error("boundary value {value:e} exceeds truncation budget {budget:e} at t = {time}")]
    BoundaryMassLeak { value: f64, budget: f64, time: f64 },

    #[error("path functional is not certified bounded: {0}")]
    UnboundedComposite(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

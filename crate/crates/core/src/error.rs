use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    /// A query region does not meet the data (ball outside the box, empty
    /// time window, ...).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The query is finer than the grid can resolve.
    #[error("below resolution floor: {0}")]
    Resolution(String),
    #[error("field carries no pressure")]
    MissingPressure,
    #[error("operation requires a fully periodic box")]
    NotPeriodic,
    #[error("need at least {needed} time samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;

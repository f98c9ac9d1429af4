use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad sizes, mismatched shapes, out-of-range values.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An enumeration would exceed the configured vertex cap.
    #[error("enumeration of {required} vertices exceeds the cap of {cap}")]
    ResourceLimit { required: u128, cap: u64 },

    /// A visibility was requested for a scenario that does not violate the
    /// inequality.
    #[error("scenario does not violate the inequality (violation = {violation})")]
    NoViolation { violation: f64 },

    /// Internal inconsistency, e.g. an enumerated vertex beating a bound that
    /// was declared exact.
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// Exact integer elimination overflowed its fixed-width arithmetic.
    #[error("integer overflow during exact elimination")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

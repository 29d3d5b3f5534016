//! Error type shared by every solver in the crate.

use alloc::string::String;
use core::fmt;

/// Failure modes reported by the solvers and primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of an operator.
    Domain(String),
    /// Invalid construction parameters.
    Config(String),
    /// A non-finite value or a failed factorization.
    Numerical(String),
    /// A caller-supplied component broke its documented contract.
    Contract(String),
    /// The Armijo search exhausted its backtracking budget.
    LineSearch(String),
    /// A protocol invariant was violated at run time.
    Invariant(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Numerical(m) => write!(f, "numerical error: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::LineSearch(m) => write!(f, "line-search failure: {m}"),
            Error::Invariant(m) => write!(f, "invariant violation: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;

use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two tables or vectors disagree on a dimension.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An index (agent, state, action, constraint) is out of range.
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    /// A numeric argument violates its domain.
    InvalidArgument(String),
    /// The chain has more than one recurrent class; `first` and `second`
    /// lie in different classes.
    Multichain { first: usize, second: usize },
    /// A linear system that should be nonsingular was singular.
    Singular,
    /// The identical-interest solver was handed a game whose agents disagree.
    NotIdenticalInterest { agent: usize, state: usize, action: usize },
    /// An iterative solver hit its iteration cap.
    NotConverged { iterations: usize, residual: f64 },
    /// Brute-force enumeration would exceed its guard.
    EnumerationTooLarge { count: f64, limit: usize },
    /// KL divergence with `q = 0` where `p > 0`.
    SupportViolation { index: usize },
    /// The oracle failed during game dynamics.
    OracleFailed { epoch: usize, residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected length {expected}, found {found}"),
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Multichain { first, second } => write!(
                f,
                "chain is multichain: states {first} and {second} lie in different recurrent classes"
            ),
            Error::Singular => write!(f, "singular linear system"),
            Error::NotIdenticalInterest {
                agent,
                state,
                action,
            } => write!(
                f,
                "rewards not identical across agents (agent {agent}, state {state}, joint action {action})"
            ),
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "solver did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::EnumerationTooLarge { count, limit } => write!(
                f,
                "enumeration of {count:e} deterministic policies exceeds guard {limit}"
            ),
            Error::SupportViolation { index } => write!(
                f,
                "KL support violation: reference distribution is zero at index {index}"
            ),
            Error::OracleFailed { epoch, residual } => write!(
                f,
                "oracle failed at epoch {epoch} (residual {residual:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller violated a precondition (dimension mismatch, out-of-range symbol, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A dense or enumerated object would exceed the configured size cap.
    #[error("capacity exceeded: {what} needs {requested} entries, cap is {cap}")]
    Capacity {
        what: String,
        requested: u128,
        cap: u128,
    },

    /// An iterative solver ran out of budget.
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// Input outside the domain where a closed form is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two independent computations of the same quantity disagree.
    #[error("cross-check failed: {what} differ by {difference:e}")]
    CrossCheck { what: String, difference: f64 },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn capacity(what: impl Into<String>, requested: u128, cap: u128) -> Self {
        Error::Capacity {
            what: what.into(),
            requested,
            cap,
        }
    }
}

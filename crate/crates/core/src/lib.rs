//! Higher-order and recursive Markov chains.
//!
//! The crate covers:
//!
//! * [`tensor_ops`]: commutation, marginalization, branching and cycling
//!   operators, applied matrix-free or materialized densely;
//! * [`markov`]: state encoding, transition matrices of order-`k` chains,
//!   stationary vectors and chain-rule decomposition of joint distributions;
//! * [`shift`]: `k`-shift matrices and marginal stationary distributions;
//! * [`recursive`]: chains whose order-`(m+1)` conditionals are a fixed map of
//!   the order-`m` ones, and the fixed-point equation `ω = f(ω)ω`;
//! * [`bandit`]: the two-armed bandit with multiplicative confidences;
//! * [`cli`]: the `recmarkov` command-line front end.

pub mod bandit;
pub mod cli;
pub mod dense;
pub mod error;
pub mod markov;
pub mod recursive;
pub mod sampling;
pub mod shift;
pub mod simplex;
pub mod tensor_ops;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use markov::{HigherOrderChain, SolverConfig, StationaryResult, TransitionOperator};
pub use simplex::{ConditionalFamily, SimplexVector};
pub use tensor_ops::StructuredOperator;

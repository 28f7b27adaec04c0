//! Training single-hidden-layer ReLU and leaky-ReLU networks under uniform
//! (Chebyshev) and L1 loss with the generic DC algorithm.
//!
//! The loss is written as a difference of convex functions `p = g - h`
//! ([`dc`]). Each DCA iteration linearises `h` at the current weights and
//! minimises the convex remainder exactly as a linear program ([`lp`]).
//! [`baseline`] provides Adam and Adamax subgradient training on the same
//! losses for comparison.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod dataset;
pub mod dc;
pub mod dca;
pub mod error;
pub mod lp;
pub mod model;
pub mod verify;

pub use dataset::{Dataset, GridSpec, Sample, Synthetic};
pub use dc::{DcValue, Subgradient};
pub use dca::{DcaConfig, DcaStatus, DcaTrace};
pub use error::{Error, Result};
pub use lp::{LpProblem, LpSolution, LpStatus, SolverConfig};
pub use model::{Activation, Norm, Weights};

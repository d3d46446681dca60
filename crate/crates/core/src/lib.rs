//! Prophet bounds and optimal sequential selection.
//!
//! * [`dist`]: marginal laws, couplings and seeded sampling.
//! * [`maximal`]: the maximal function `M*(s)`, the threshold `t(n,s)` and
//!   the expectation bound `Σ Fᵢ(t)`.
//! * [`bellman`]: backward induction for the sequential knapsack and the
//!   sequential monotone subsequence problems.
//! * [`policy`]: forward simulation of the optimal threshold policies and the
//!   statistical comparisons built on them.
//! * [`study`]: self-checking worked scenarios and the longest increasing
//!   subsequence baseline.
//! * [`cli`]: the `brsel` command-line harness.

pub mod bellman;
pub mod cache;
pub mod cli;
pub mod dist;
pub mod error;
pub mod maximal;
pub mod policy;
pub mod rng;
pub mod roots;
pub mod stats;
pub mod study;

pub use bellman::{BellmanSolution, GridSpec, Problem, ThresholdTable, ValueFunctionGrid};
pub use dist::{DistributionModel, JointCoupling, MarginalSet};
pub use error::{Error, Result};
pub use maximal::{SelectionResult, ThresholdSolution};

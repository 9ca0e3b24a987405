// negated comparisons like `!(x >= 0.0)` are used to reject NaN parameters
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Block-sparse compressive sensing lab.
//!
//! The crate measures how block-sparse a signal is (the q-ratio block
//! sparsity), estimates the block-constrained minimal singular value (BCMSV)
//! of a measurement matrix by multi-start nonconvex minimization, certifies
//! exact-recovery sparsity levels through a convex-concave procedure on the
//! matrix kernel, solves three block-sparse recovery programs, and evaluates
//! the computable error bounds that tie those pieces together.
//!
//! Entry points:
//! - [`block`]: partitions, mixed l2/lq norms, sparsity measures.
//! - [`ensembles`]: seeded Gaussian / Bernoulli / Hadamard matrices.
//! - [`bcmsv`]: BCMSV estimation and the embedding chain check.
//! - [`ccp`]: kernel-based certification of recoverable sparsity levels.
//! - [`solvers`]: basis-pursuit, Dantzig-selector, and group-lasso solvers.
//! - [`bounds`]: error-bound evaluation and the block-RIC comparison.
//! - [`experiments`]: batch grids behind the `bcmsv-lab` command-line tool.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod bcmsv;
pub mod block;
pub mod bounds;
pub mod ccp;
pub mod ensembles;
mod error;
pub mod experiments;
pub(crate) mod linalg;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};

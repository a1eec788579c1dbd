//! Differentiable constraint reasoning.
//!
//! Discrete constraints (cardinality, all-different, k-sparsity, CNF clauses)
//! are relaxed into entropy-based penalties over categorical and Bernoulli
//! distributions, then optimized jointly with a reconstruction objective by
//! constraint-aware stochastic gradient descent: batches are drawn from the
//! connected components of a constraint graph and per-constraint penalty
//! weights are adjusted by satisfiability between gradient steps.
//!
//! The crate is `no_std` (it needs `alloc`). IO, file formats and the command
//! line live in the `drnet` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod demix;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod math;
pub mod optimizer;
pub mod relaxations;
pub mod rng;
pub mod sat;
pub mod sudoku;

pub use error::{Error, Result};

//! Sparse high-dimensional linear regression: LASSO and Post-LASSO with
//! data-driven penalties, noise-level iteration, exhaustive small-scale
//! oracles, restricted-eigenvalue diagnostics and a Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dist;
pub mod eigen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod post;
pub mod report;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod subsets;

pub use error::{Error, Result};

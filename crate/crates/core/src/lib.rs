//! One-shot surrogate learning for PDE-constrained optimization under
//! uncertainty.
//!
//! A deterministic control `z` and the parameters `θ` of a parametric state
//! surrogate `u(θ, y)` are optimized together by minimizing a penalized
//! empirical risk: the tracking misfit plus a weighted squared residual of the
//! parametric Poisson equation on the unit square.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line driver live in the `oneshot` crate.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiments;
pub mod fem;
pub mod field;
pub mod linalg;
pub mod objective;
pub mod optim;
pub mod surrogate;

pub use error::{Error, Result};

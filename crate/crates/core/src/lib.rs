//! Decentralized conflict resolution with online adaptive ADMM and model
//! predictive control.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod agent;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod optim;
pub mod path;
pub mod sim;
pub mod testkit;

pub use error::{Error, Result};

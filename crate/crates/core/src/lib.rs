//! Classical simulation of quantum policy iteration.
//!
//! The quantum subroutines (linear-system solver, measurement, tomography) are
//! replaced by their output guarantees so that exact and approximate quantum
//! policy iteration can be run and checked on small environments.

pub mod error;
pub mod mdp;
pub mod env;
pub mod quantum;
pub mod blockenc;
pub mod qpi;
pub mod qapi;
pub mod experiment;

pub use error::{Error, Result, SystemKind};

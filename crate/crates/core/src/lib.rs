//! Learning to stabilize an unknown continuous-time stochastic linear system.
//!
//! The plant `dx = (A x + B u) dt + C dW` is driven by randomized linear
//! feedback plus a piecewise-constant Gaussian dither. The recorded trajectory
//! yields a matrix-normal posterior over `[A, B]ᵀ`; a draw from it is fed to a
//! Riccati solver whose LQR gain is then checked against the true system.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes;
pub mod control;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod sde;
pub mod stabilizer;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use linalg::Matrix;

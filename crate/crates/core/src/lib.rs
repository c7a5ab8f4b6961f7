//! PINN and XPINN solvers for inverse problems in compressible Euler flow:
//! density-gradient, inflow and wall data plus the governing equations
//! recover the full primitive state.

// NaN must fail validation, so `!(x > 0.0)` is deliberate; jets and
// matrices index several arrays per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::suspicious_arithmetic_impl)]

pub mod analysis;
pub mod autodiff;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod loss;
pub mod network;
pub mod optimize;
pub mod oracles;
pub mod physics;
pub mod plot;
pub mod sampling;
pub mod selftest;

pub use error::{Error, Result};

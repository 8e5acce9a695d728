//! Locally calibrated uncertainty propagation for approximate linear-Gaussian
//! dynamics, with a hybrid double-integrator testbed and an MPPI planner that
//! consumes the calibrated beliefs.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! experiment drivers live in the companion `lucca` crate.
#![no_std]

extern crate alloc;

pub mod conformal;
pub mod dynamics;
pub mod error;
pub mod locart;
pub mod planner;
pub mod rng;
mod serde_ext;
pub mod statmath;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

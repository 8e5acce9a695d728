//! Experiment harness for `lucca-core`: environment and preset files,
//! calibration-grid generation, coverage and planning experiments, heatmap
//! export, CSV reporting and the `lucca` command line.

pub mod benchmark;
pub mod calibrate;
pub mod cli;
pub mod coverage;
pub mod envfile;
pub mod error;
pub mod grid;
pub mod model_io;
pub mod preset;
pub mod report;
pub mod verify;

pub use error::{Error, Result};

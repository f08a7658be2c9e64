//! File formats, configuration and command-line front end for `rosmm-core`.
//!
//! Datasets are CSV files with a JSON sidecar, models are JSON checkpoints
//! and every float is written with 17 significant digits, so files round-trip
//! exactly and reruns with the same seed are byte-identical.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};

//! Batch front-end for isotherm parameter estimation: run configuration,
//! presets, synthetic data, fits, repeated trials and their output files.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

pub use config::{Preset, RunConfig};
pub use error::{CliError, Result};

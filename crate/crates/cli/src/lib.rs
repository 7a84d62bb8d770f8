//! Batch front end: one JSON scenario in, one CSV and a manifest out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};

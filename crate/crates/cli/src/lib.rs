//! Configuration, file formats and subcommands of the `cavity-readout` tool.
//!
//! Exit codes: 0 success, 1 file IO failure, 2 configuration or validation
//! error, 3 numerical non-convergence (data is still written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod plot;

pub use config::RunConfig;
pub use error::{exit, CliError, CliResult};

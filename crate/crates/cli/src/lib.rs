//! Batch front end for the `rshe` toolkit: config resolution, the command
//! computations and their CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod reports;

mod commands;

pub use commands::{execute, run_command, RunError, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
pub use config::{parse, Parse, RunConfig};

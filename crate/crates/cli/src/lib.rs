//! Config-driven driver for the qoct simulator.
//!
//! Each command has a pure form returning in-memory results and a `write_*`
//! form that stores them under an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::Config;
pub use error::CliError;

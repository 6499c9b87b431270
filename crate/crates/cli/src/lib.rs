//! Configuration, command pipelines and deterministic writers for the
//! `movingwave` tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Command, Options, Outcome, Report, Setup};
pub use config::Config;
pub use error::{CliError, Result};

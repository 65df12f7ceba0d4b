//! File formats, configuration and subcommands of the `afen` tool.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod experiments;
pub mod jsonl;
pub mod model;
pub mod wav;

pub use error::{CliError, CliResult};

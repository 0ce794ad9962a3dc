//! File formats, benchmarks and subcommands behind the `loewner` binary.

pub mod bench;
pub mod commands;
pub mod error;
pub mod io;

pub use error::{CliError, Result};

//! Configuration parsing, experiment dispatch and result output for the
//! `mvsao` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod selftest;

pub use config::{resolve, Format, Kind, Overrides, RunConfig};
pub use error::{CliError, Result};
pub use output::{ResultRecord, CSV_COLUMNS};
pub use run::{execute, run_and_write, RunOptions};

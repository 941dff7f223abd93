//! File formats, run configuration and the `treemps` command line on top of
//! `treemps-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod numfmt;
pub mod suites;

pub use error::CliError;

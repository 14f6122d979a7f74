//! Standard-library companion of `mpqkd-core`: configuration files,
//! rayon-parallel runners and the `mpqkd` command-line tool.

// `!(x > 0.0)` rejects NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod parallel;

pub use config::RunConfig;
pub use error::CliError;

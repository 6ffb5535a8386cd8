//! Configuration loading, record emission and the command implementations behind the
//! `mpfc` binary.

// `!(x < y)` is deliberate throughout: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod records;

pub use commands::{audit_files, oracle, simulate, AuditSet};
pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;

/// The shipped reference scenario, embedded for `mpfc demo-paper`.
pub const PAPER_CONFIG: &str = include_str!("../../../configs/paper-example.toml");

//! Sweep configuration, trial execution and result files for the
//! `advice-learn` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{AdviceModel, Family, SweepSpec};
pub use error::CliError;
pub use output::{Format, ResultRow, SCHEMA_VERSION};

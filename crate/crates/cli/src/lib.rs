//! Batch front-end: reads JSON problem files, runs certifications,
//! simulations and grid sweeps, and renders JSON reports or CSV tables.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{parse_config, ConfigError, ProblemConfig};
pub use report::{Report, RunOutput, EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK};
pub use run::{run, Command, Overrides, RunError};

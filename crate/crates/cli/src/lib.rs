//! Batch front end for `spectral-thermo`: reads a job config, runs one
//! command and renders a JSON or CSV report.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Command, Format, JobConfig, Params, ValidationError};
pub use output::render;
pub use run::{run, Overrides, Report, Status, Timing};

/// JSON schema that every JSON report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

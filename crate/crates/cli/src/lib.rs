//! Config-driven runner: loads an experiment, runs the selected module stages and renders
//! the report.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use pipeline::{run, Cache};
pub use report::{Check, Relation, RunReport, Series};

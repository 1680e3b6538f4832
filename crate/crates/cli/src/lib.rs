//! Experiment driver: dataset simulation, training, reconstruction with
//! every method, metrics and diagnostics.

pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;
pub mod report;

pub use config::{ExperimentConfig, Preset};
pub use error::{CliError, CliResult};
pub use report::{DiagnosticsReport, Method, MetricsReport, TimingReport};

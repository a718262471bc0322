//! Experiment harness around the `sparsar` library: config parsing,
//! synthetic scene generation, the simulation/reconstruction/training
//! pipeline, metric reports, and image export.

pub mod config;
pub mod error;
pub mod experiment;
pub mod imageio;
pub mod report;
pub mod scene;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, RunOptions};
pub use report::Report;

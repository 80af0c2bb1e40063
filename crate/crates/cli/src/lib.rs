//! Command-line harness for private allocation experiments: configuration, Monte Carlo
//! sweeps, bound checks and regime reports.

pub mod app;
pub mod checks;
pub mod config;
pub mod describe;
pub mod error;
pub mod io;
pub mod presets;
pub mod regime;
pub mod strategy;
pub mod sweep;

pub use app::run;
pub use config::{parse, ExperimentConfig};
pub use error::CliError;

//! File formats, the config-driven experiment runner and the `ntmp` command
//! line on top of `ntmp-core`.

pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Method};
pub use error::{Error, Result};

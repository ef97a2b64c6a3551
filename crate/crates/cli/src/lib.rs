//! Experiment orchestration for `banditpath`: configuration, the five
//! commands and their CSV/JSON outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_rate, cmd_simulate, cmd_sweep_c, cmd_toy, cmd_trajectory, RunContext};
pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;

/// Environment variable consulted for the worker count when `--threads` is
/// not given.
pub const THREADS_ENV: &str = "BANDITPATH_THREADS";

/// `requested`, else the available parallelism.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

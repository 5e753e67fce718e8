//! Experiment harness around `coloc-core`: scenario files, Monte-Carlo runs
//! with shared measurement draws, RMSE summaries, the two experiment
//! protocols, a complexity bench and the oracle validation suites.

pub mod bench;
pub mod config;
pub mod metrics;
pub mod output;
pub mod protocols;
pub mod runner;
pub mod validation;

pub use config::{load_scenario, parse_scenario, ConfigError};
pub use metrics::{compute_rmse, NeighborBucket, RmsePoint};
pub use runner::{run_batch, run_scenario, simulate_run, Algorithm, RunOutcome, RunRecord};

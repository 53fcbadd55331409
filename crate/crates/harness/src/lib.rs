//! Experiment harness for `conlearn-core`: JSON configs, replicate runs,
//! CSV/JSON outputs and the verification suite behind the `conlearn` binary.

pub mod checks;
pub mod config;
pub mod demo;
pub mod error;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ResolvedConfig};
pub use error::{HarnessError, Result};
pub use runner::{run_experiment, run_replicate, RunResult, RunStatus};

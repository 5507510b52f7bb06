//! Batch experiment harness: configuration, replicated runs, aggregation and output.

pub mod build;
pub mod config;
pub mod demos;
pub mod harness;
pub mod output;

pub use build::{build_instance, Instance};
pub use config::ExperimentConfig;
pub use harness::{compare_bounds, run_experiment, AggregateRecord};
pub use output::emit;

/// Harness failure, mapped onto process exit codes by the binary.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] subcorr::Error),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for configuration and output problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Library(e) if e.is_solver_failure() => 3,
            _ => 2,
        }
    }
}

//! Orchestration behind the `uygraph` binary: configuration, the five
//! subcommands and their report files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_augment, cmd_diagnose, cmd_simulate, cmd_sweep, cmd_train, simulation_setup, train_runs, DataSource,
    RunSummary, Simulation, SweepRow, TrainReport,
};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] uygraph::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use uygraph::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::InvalidArgument(_) | E::MissingParameter(_)) => 1,
            CliError::Core(_) | CliError::Io(_) => 2,
        }
    }
}

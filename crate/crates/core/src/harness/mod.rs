//! Seeded, parallel experiment runner: configuration, trials, aggregation
//! and CSV output.

pub mod algo;
pub mod config;
pub mod output;
pub mod run;

pub use algo::{AlgoSpec, Cell};
pub use config::{AlgoKind, ExperimentConfig};
pub use output::write_outputs;
pub use run::{aggregate_trials, env_cell, run_experiment, sweep_cells, AggregateResult, TrialPlan, TrialResult};

//! Experiment plumbing on top of `cnre-core`: single runs with their
//! artifacts, hyperparameter grids, summary tables and the `cnre` CLI.

pub mod cli;
pub mod grid;
pub mod report;
pub mod run;

pub use grid::{run_grid, GridOutcome, GridSpec};
pub use report::{aggregate, SummaryRow};
pub use run::{execute_run, EvalSettings, RunMetrics, RunRecord};

/// Version stamp written into every record.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

//! Experiment orchestration: plan files, deterministic parallel runs with CSV
//! output, per-cell summaries and log-log rate fits.

mod plan;
mod runner;
mod stats;

pub use plan::{ExperimentPlan, HyperChoice};
pub use runner::{
    cell_config, ground_truth, instance_seed, manifest_path, run_plan, run_rows, GroundTruth, Row, RunReport,
    CSV_COLUMNS,
};
pub use stats::{
    fit_rate, mean, median, ols, read_rows, sample_std, summarize, theory_exponent, CellSummary, RateFit, Summary,
};

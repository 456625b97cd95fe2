//! Metrics, replicate experiments and cross-validation.

mod cv;
mod grid;
mod kselect;
mod metrics;

pub use cv::{cross_validate, fold_assignment, CvConfig, CvMethodResult, CvReport};
pub use grid::{
    replicate_seed, run_grid, Aggregate, ExperimentGrid, ExperimentReport, Record, Sweep,
    SweepParam,
};
pub use kselect::{run_k_selection, KSelectionGrid, KSelectionReport, KSelectionRow};
pub use metrics::{pmse, pmse_log, snr, sse, sse_log, LogMetric};

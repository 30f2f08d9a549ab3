//! Experiment metrics: ROC curves, matched false-alarm comparison, tracking
//! accuracy, the mutual-information gain and the experiment pipelines built
//! on them.

pub mod experiment;
mod mi;
mod roc;
mod tracking;

pub use experiment::{
    banded_matrix, benchmark_point, db_to_linear, linear_to_db, run_benchmark, run_tracking, BenchmarkPoint,
    BenchmarkRow, BenchmarkSettings, LearnSettings, Scenario, TrackingRun,
};
pub use mi::{kl_divergence, mi_gain_mc, mi_trial, MiEstimate};
pub use roc::{
    compare_at_matched_pfa, memoryless_energy_detector, roc_points, threshold_grid, MatchedPoint, RocCurve, RocPoint,
};
pub use tracking::{tracking_report, TrackingReport};

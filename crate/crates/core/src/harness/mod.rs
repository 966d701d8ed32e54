//! Experiment driver: run a tracker over a sequence, detect and correct
//! failures against groundtruth, and report failure counts and distances.

mod config;
mod experiment;
mod metrics;
mod tracker;

pub use config::{apply_overrides, RunConfig, TrackerKind};
pub use experiment::{
    compare, evaluate_estimates, learn_template_from_dir, learn_template_from_truth, run_experiment,
    write_run_outputs, Comparison, RunReport, SettingSummary, TrackerSetting, SUMMARY_HEADER,
    TRAINING_PATCHES,
};
pub use metrics::{
    detect_and_correct, diagnostics_csv, mean_distance_series, metrics_csv, parse_metrics_csv,
    scale_failures, FrameMetrics, METRICS_HEADER,
};
pub use tracker::{Correctable, StepDiagnostics, Tracker};

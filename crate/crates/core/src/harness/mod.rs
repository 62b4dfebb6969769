//! Experiment orchestration: configuration, convergence detection, single runs,
//! sweeps and result files.

mod config;
mod convergence;
mod experiment;
mod sweep;

pub use config::{ExperimentConfig, ModelKind};
pub use convergence::{detect_convergence, overall_computations, ConvergenceCriterion, ThresholdMode};
pub use experiment::{
    load_report, loss_curve_csv, rounds_csv, run_experiment, write_outputs, ExperimentReport, LOSS_CURVE_FILE,
    REPORT_FILE, ROUNDS_FILE,
};
pub use sweep::{median, sweep, SettingSummary, SweepRow, SweepSetting, SweepSpec, SweepTable, SWEEP_FILE};

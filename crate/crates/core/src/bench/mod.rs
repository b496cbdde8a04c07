//! Experiment orchestration: seeded multi-trial runs, paired comparisons and
//! the reproduction suites.

mod compare;
mod experiment;
mod report;
pub mod seed;
mod suites;

pub use compare::{compare_suite, Comparison, ComparisonRow, PairRatio};
pub use experiment::{
    experiment_lyapunov, median, run_experiment, run_experiment_with, ExperimentReport, ExperimentSpec, ModelSpec,
    SystemSpec, ThresholdResult, ThresholdSummary, TrialReport, TrialStatus,
};
pub use report::{curves_csv, experiment_json, report_json, suite_table_csv, trials_csv};
pub use seed::derive_seed;
pub use suites::{
    baseline_esn, ks_heng, run_suite, state_counts, suite_specs, Check, CountRow, Suite, SuiteOptions, SuiteReport,
    DEFAULT_SUITE_SEED, TABLE2_TRAINING_STEPS,
};

//! Experiment configuration, orchestration, and reporting.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{EnvironmentKind, EvalConfig, ExperimentConfig, Method};
pub use experiment::{
    alpha_selection_csv, evaluate_methods, run_alpha_selection, run_experiment, train_methods,
};
pub use report::{compare_methods, format_sig, CompareSummary, EvalReport, MethodReport};

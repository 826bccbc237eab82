//! Closed-loop trials, plate experiments and method comparison.

pub mod cli;
pub mod experiment;
pub mod manifest;
pub mod trial;

pub use crate::policy::{evaluate_confusion, ConfusionMatrix};
pub use experiment::{compare_methods, run_plate_experiment, Comparison, ComparisonRow, Method, Metrics, PlateRun};
pub use trial::{run_acquisition_attempt, walk_mount, AttemptReport, Policy, ServoSetting, TrialConfig};

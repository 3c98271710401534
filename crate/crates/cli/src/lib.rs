//! Experiment runner for `fpl-core`: JSON configs in, JSON reports, CSV
//! fields and SVG contour plots out.

pub mod config;
pub mod experiment;
pub mod probes;
pub mod suite;
pub mod svg;

pub use config::{BarrierConfig, Checks, ExperimentConfig, TransformKind};
pub use experiment::{run_experiment, run_pipeline, write_artifacts, ExperimentReport, Overrides, RunOutput, Stage, StageError};
pub use suite::{run_suite, Status, SuiteOutcome, SummaryRow};

/// Exit status when every enabled check passed.
pub const EXIT_PASS: i32 = 0;
/// A check ran and failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// A stage raised an error before the checks could complete.
pub const EXIT_STAGE_ERROR: i32 = 2;

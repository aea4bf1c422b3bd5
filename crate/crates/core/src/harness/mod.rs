//! Experiment orchestration behind the `page` command-line tool.
//!
//! An [`ExperimentConfig`] names a problem, a regime (or manual
//! parameters), accuracy, and seeds. Running it writes one trace CSV per
//! seed and a summary JSON that holds everything needed to replay the runs.

mod compare;
mod config;
mod experiment;
mod suite;
mod trace_csv;

pub use compare::{compare_methods, CompareOutcome, CompareRow, MethodMedians};
pub use config::{DataFormat, ExperimentConfig, Method, Outputs, Overrides, ProblemSpec};
pub use experiment::{
    replay, run_experiment, ExperimentOutcome, ReplayOutcome, RunSummary, Summary,
};
pub use suite::{verify_suite, CheckKind, SuiteConfig, SuiteOutcome};
pub use trace_csv::{decimate, render_trace_csv, CSV_HEADER, MAX_FULL_ROWS};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Process exit status for an error that aborted a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

//! Experiment harness: builds the benchmark datasets, runs central and
//! federated clustering over repetitions and writes CSV/JSON/plot reports.

pub mod error;
pub mod experiment;
pub mod report;
pub mod spec;
pub mod stats;

pub use error::{CliError, Result};
pub use experiment::{run_experiment, run_g2_suite, ExperimentReport, RunRow, RunStatus, Summary, Timings};
pub use report::{emit_all, emit_report, Format};
pub use spec::{Case, ExperimentSpec, G2SuiteSpec, Method, Settings};

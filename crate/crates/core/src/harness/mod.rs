//! Instances, generators, the exact oracle, experiment runs and reports.

pub mod experiment;
pub mod generator;
pub mod instance;
pub mod oracle;
pub mod report;

pub use experiment::{run_experiment, run_suite, run_with_oracle, Checks, ExperimentError, Outcome, RunConfig, Trace, Variant};
pub use generator::{acceptance_corpus, gen_instance, GenError, GenParams, CORPUS_LIMITS, RECIPES};
pub use instance::{Instance, InstanceError};
pub use oracle::{offline_opt, OracleError, OracleResult, OracleTable};
pub use report::{read_csv, render_text, summarize, write_csv, ReportRow};

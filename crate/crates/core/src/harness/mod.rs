//! Experiment configuration, orchestration and result files.

mod config;
mod output;
mod rate;
mod run;

pub use config::{ExperimentConfig, Mode, OutputSection, ResonanceSection, Tolerances, VerdictSection, DEFAULT_EPS};
pub use output::{csv_artifact, json_artifact, write_artifacts, Artifact, SCHEMA_VERSION};
pub use rate::{fit_rate, RateFit};
pub use run::{dispatch, divergence_verdict, jump_rates, run_experiment, Dispatch, Outcome, RateReport, Verdict};

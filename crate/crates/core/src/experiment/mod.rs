//! Config-driven experiments and their artifacts.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Format, Mode};
pub use output::{csv_body, write_atomic, write_sidecar, JsonDoc, Table};
pub use run::{run, CheckOutcome, RunOutput};

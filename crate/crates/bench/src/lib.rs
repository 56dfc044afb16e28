//! Reproducible Monte Carlo experiments over the scheduling algorithms of
//! `jtsched-core`: a TOML experiment description, a parallel trial runner,
//! summary statistics and CSV/JSON output.

pub mod error;
pub mod io;
pub mod runner;
pub mod spec;
pub mod summary;

pub use error::{BenchError, Result};
pub use runner::{run_experiment, run_experiment_with, Instance, Run, Status, TrialRecord};
pub use spec::{Algorithm, Axis, ExperimentSpec, NetworkTemplate};
pub use summary::{summarize, Summary, SummaryRow};

//! Experiment harness around `sania-core`: dataset files, seeded training
//! runs with CSV traces, and the invariance, learning-rate and robustness
//! experiments exposed by the `sania` binary.

pub mod config;
pub mod data;
pub mod experiments;
pub mod method;
pub mod runner;
pub mod trace;

pub use config::{ObjectiveName, PrecondParams, RunConfig};
pub use method::{Method, Precond};
pub use runner::{run, run_detailed, run_on, HarnessError, RunOutput};
pub use trace::{TraceRow, TrainTrace};

//! Batch harness for persona-conditioned digital twins: corpus store,
//! resumable condition runs, fidelity and fairness evaluation, and reports.

pub mod config;
pub mod error;
pub mod eval;
pub mod report;
pub mod runner;
pub mod setup;
pub mod store;

pub use config::{EmbeddingSettings, HarnessConfig, ModelProfile};
pub use error::{HarnessError, Result};
pub use runner::{execute_run, RunRequest, RunSummary};
pub use store::Workspace;

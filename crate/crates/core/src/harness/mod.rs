//! Metrics, reports, fixtures and the experiment drivers behind the CLI.

mod ablation;
mod chain;
mod config;
pub mod fixtures;
mod metrics;
mod pipeline;
mod report;

pub use ablation::{ablation_workload, run_ablation, AblationRow, AblationWorkload, RowOutcome};
pub use chain::{chain_value_iteration, train_chain, ChainTraining, ChainTrainingConfig};
pub use config::{BackendKind, MemoryMode, RunConfig};
pub use metrics::{compute_metrics, p95, EvalInputs, GradedExam, Metric, MetricsReport, RecordedRatings, STEP_THRESHOLD};
pub use pipeline::{run_pipeline, run_tutor_sim, PipelineOutcome, ResponseRecord, RESPONSES_FILE, TIMINGS_FILE};
pub use report::{render_ablation_table, render_metrics_table, sha256_hex, RunReport};

use crate::agents::AgentError;
use crate::exam::{ExamError, Violation};
use crate::memory::MemoryError;
use crate::mmdp::MmdpError;
use crate::retrieval::RetrievalError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{} compliance violations", .0.len())]
    Compliance(Vec<Violation>),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error(transparent)]
    Exam(#[from] ExamError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Mmdp(#[from] MmdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

//! Planner and executor agents, the chat backend contract and its
//! deterministic mock, and the simulated-student environment.

mod backend;
mod explanation;
mod generator;
mod mock;
mod normalize;
mod planner;
mod protocol;
mod session;
mod solver;
mod tutor;

pub use backend::{ChatBackend, DecodeParams, HttpBackendConfig, Message, Role, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
#[cfg(feature = "http")]
pub use backend::HttpBackend;
pub use explanation::ExplanationOutline;
pub use generator::{slot_state_text, GenerateOptions, GeneratedExam, ValidationFault, NOVELTY_THRESHOLD};
pub use mock::{MockBackend, MOCK_ID};
pub use normalize::normalize_input;
pub use planner::{plan, Plan, RequestKind, Subtask, SubtaskKind, SubtaskStatus, DEFAULT_RETRY_BUDGET};
pub use protocol::{
    fingerprint, parse_answer, parse_draft, parse_response, parse_solve_prompt, render_draft, render_solve_prompt,
    worked_steps, CaseLine, GeneratedDraft, GenerationRequest,
};
pub use session::AgentSession;
pub use solver::{SolveReport, SolvedItem};
pub use tutor::{
    analyze_errors, recommend_path, tutoring_metrics, PRACTICE_SIZES, Attempt, GapConfig, GapReport, Phase, PracticeProposer,
    PracticeUnit, Skill, SkillGap, SkillOntology, SkillStats, StudentProfile, StudentSimulator, StudyPlan, TutoringConfig,
    TutoringMetrics, TutoringReport,
};

use crate::exam::ExamError;
use crate::memory::MemoryError;
use crate::mmdp::MmdpError;
use crate::retrieval::RetrievalError;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("generation failed for {cell} after {} attempts", raw_outputs.len())]
    Generation { cell: String, raw_outputs: Vec<String> },
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("dispatch error: {0}")]
    Dispatch(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("metric unavailable: {0}")]
    Unavailable(String),
    #[error("exam still non-compliant after {attempts} validation rounds ({} violations)", violations.len())]
    NonCompliant { attempts: u32, violations: Vec<crate::exam::Violation> },
    #[error(transparent)]
    Exam(#[from] ExamError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Mmdp(#[from] MmdpError),
}

//! Exam blueprint, item formats, compliance validation, grading, novelty and
//! the JSON interchange format.
//!
//! Everything here is a plain value; operations are pure functions.

mod blueprint;
mod compliance;
mod grading;
mod interchange;
mod item;
mod novelty;

pub use blueprint::{CellKey, CognitiveLevel, MatrixCell, Section, SectionTotals, SpecificationMatrix};
pub use compliance::{mean_compliance_rate, validate_exam, ComplianceReport, Violation};
pub use grading::{grade_item, score_exam, ExamScore, ItemScore, ScoringScheme};
pub use interchange::{parse_exam, serialize_exam};
pub use item::{format_number, make_question_id, Exam, ExamItem, ItemBody, Provenance, QuestionId, Response, CHOICE_LETTERS};
pub use novelty::{multiset_jaccard, ngram_counts, novelty_overlap, stem_overlap, DEFAULT_NGRAM};

#[derive(Debug, thiserror::Error)]
pub enum ExamError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid specification matrix: {0}")]
    InvalidMatrix(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

use serde::{Deserialize, Serialize};

use super::normalize::normalize_input;
use super::planner::{plan, Plan, RequestKind, SubtaskStatus};
use super::protocol::{fingerprint, parse_answer, render_solve_prompt, CaseLine};
use super::session::{by_weight, AgentSession};
use super::AgentError;
use crate::exam::{grade_item, score_exam, Exam, ExamScore, Provenance, QuestionId, Response, ScoringScheme, SpecificationMatrix};
use crate::memory::Case;

const SOLVER_SYSTEM: &str = "You solve exam items. Show numbered steps and end with one ANSWER: line.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedItem {
    pub item_id: QuestionId,
    pub response: Response,
    /// Raw completion, including the worked steps.
    pub completion: String,
    /// Set when the completion had no parseable answer.
    pub flagged: bool,
    pub retrieved: Vec<String>,
    pub case_id: String,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub exam: Exam,
    pub plan: Plan,
    pub solved: Vec<SolvedItem>,
    pub score: ExamScore,
}

impl SolveReport {
    pub fn responses(&self) -> Vec<Response> {
        self.solved.iter().map(|s| s.response.clone()).collect()
    }
}

impl AgentSession {
    /// Normalize, solve and grade an already-structured exam.
    pub fn solve_exam(&mut self, exam: &Exam, scheme: &ScoringScheme, seed: u64) -> Result<SolveReport, AgentError> {
        self.run_solve(Ok(exam.clone()), &exam.exam_id, scheme, seed)
    }

    /// Same as [`solve_exam`](Self::solve_exam) starting from document bytes.
    pub fn solve_document(
        &mut self,
        document: &[u8],
        exam_id: &str,
        matrix: &SpecificationMatrix,
        scheme: &ScoringScheme,
        seed: u64,
    ) -> Result<SolveReport, AgentError> {
        let exam = normalize_input(document, matrix).map(|items| Exam::new(exam_id, Provenance::Ingested, items));
        self.run_solve(exam, exam_id, scheme, seed)
    }

    fn run_solve(
        &mut self,
        exam: Result<Exam, AgentError>,
        exam_id: &str,
        scheme: &ScoringScheme,
        seed: u64,
    ) -> Result<SolveReport, AgentError> {
        let mut plan = plan(RequestKind::SolveExam, exam_id, self.retry_budget);
        let request_id = self.open_request(&plan, exam_id)?;

        self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Running)?;
        let exam = match exam.and_then(|e| e.check().map(|_| e).map_err(|(k, msg)| AgentError::Format(format!("item {k}: {msg}")))) {
            Ok(e) => e,
            Err(err) => {
                self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Failed)?;
                return Err(err);
            }
        };
        self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Done)?;

        let solve_sub = self.set_status(&request_id, &mut plan, 1, SubtaskStatus::Running)?;
        let mut solved = Vec::with_capacity(exam.items.len());
        for item in &exam.items {
            match self.solve_item(&exam, item.id, scheme, seed, &solve_sub) {
                Ok(s) => solved.push(s),
                Err(e) => {
                    self.set_status(&request_id, &mut plan, 1, SubtaskStatus::Failed)?;
                    return Err(e);
                }
            }
        }
        self.set_status(&request_id, &mut plan, 1, SubtaskStatus::Done)?;

        self.set_status(&request_id, &mut plan, 2, SubtaskStatus::Running)?;
        let responses: Vec<Response> = solved.iter().map(|s| s.response.clone()).collect();
        let score = match score_exam(&exam, &responses, scheme) {
            Ok(s) => s,
            Err(e) => {
                self.set_status(&request_id, &mut plan, 2, SubtaskStatus::Failed)?;
                return Err(e.into());
            }
        };
        self.set_status(&request_id, &mut plan, 2, SubtaskStatus::Done)?;
        Ok(SolveReport { exam, plan, solved, score })
    }

    fn solve_item(
        &mut self,
        exam: &Exam,
        id: QuestionId,
        scheme: &ScoringScheme,
        seed: u64,
        subtask_id: &str,
    ) -> Result<SolvedItem, AgentError> {
        let item = exam.item(id).expect("id taken from the exam");
        let state = item.render_prompt();
        let retrieved = self.retrieve(&state)?;
        let ranked = retrieved.as_ref().map(by_weight).unwrap_or_default();
        let lines: Vec<CaseLine> = ranked
            .iter()
            .filter_map(|(cid, w)| {
                self.bank.get(cid).map(|c| CaseLine {
                    fingerprint: fingerprint(&c.state_text),
                    weight: *w,
                    success: c.success,
                    answer: c.action_text.clone(),
                })
            })
            .collect();
        let completion = self.call_backend(subtask_id, SOLVER_SYSTEM, &render_solve_prompt(&state, &lines), seed)?;
        let parsed = parse_answer(&completion, &item.body);
        let flagged = parsed.is_none();
        let response = parsed.unwrap_or(Response::Unanswered);
        let full = grade_item(item, &response, scheme)?.is_full();
        let retrieved_ids: Vec<String> = ranked.into_iter().map(|(cid, _)| cid).collect();
        let case = Case::new(self.bank.next_id("solve"), state, response.render(), if full { 1.0 } else { 0.0 })
            .annotate("item_id", id.to_string())
            .annotate("exam_id", exam.exam_id.clone());
        let case_id = self.retain(subtask_id, case, retrieved.as_ref().map(|r| &r.query), &retrieved_ids)?;
        Ok(SolvedItem { item_id: id, response, completion, flagged, retrieved: retrieved_ids, case_id })
    }
}

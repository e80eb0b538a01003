use super::planner::{plan, Plan, RequestKind, SubtaskStatus};
use super::protocol::{parse_draft, GenerationRequest};
use super::session::{by_weight, AgentSession};
use super::AgentError;
use crate::exam::{
    novelty_overlap, validate_exam, CognitiveLevel, ComplianceReport, Exam, ExamItem, Provenance, QuestionId, Section,
    SpecificationMatrix, DEFAULT_NGRAM,
};
use crate::memory::Case;
use crate::retrieval::Embedding;

/// Largest stem overlap (percent) for which a generated item counts as novel.
pub const NOVELTY_THRESHOLD: f64 = 30.0;

const GENERATOR_SYSTEM: &str = "You write exam items for a national mathematics exam. Follow the requested slot exactly.";

/// Test hook applied to the exam before each validation round (round 0 first).
pub type ValidationFault = Box<dyn FnMut(u32, &mut Exam)>;

pub struct GenerateOptions {
    /// Past items the novelty of each new item is measured against.
    pub reference_items: Vec<ExamItem>,
    pub novelty_threshold: f64,
    pub fault: Option<ValidationFault>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { reference_items: Vec::new(), novelty_threshold: NOVELTY_THRESHOLD, fault: None }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedExam {
    pub exam: Exam,
    pub compliance: ComplianceReport,
    /// Stem overlap per item against the reference items, percent.
    pub novelty: Vec<(QuestionId, f64)>,
    pub plan: Plan,
    /// Cases retained for the items, in item order.
    pub case_ids: Vec<String>,
}

impl GeneratedExam {
    pub fn mean_novelty(&self) -> Option<f64> {
        (!self.novelty.is_empty()).then(|| self.novelty.iter().map(|(_, n)| n).sum::<f64>() / self.novelty.len() as f64)
    }
}

/// State text of a blueprint slot, as embedded for retrieval.
pub fn slot_state_text(topic: &str, section: Section, level: CognitiveLevel) -> String {
    format!("generate a section {section} item on {topic} at the {} level", level.name().to_lowercase())
}

struct SlotDraft {
    item: ExamItem,
    state: String,
    query: Option<Embedding>,
    retrieved: Vec<String>,
}

impl AgentSession {
    /// Fills every required slot of `matrix`, validates the exam with bounded
    /// regeneration and retains one case per item.
    pub fn generate_exam(
        &mut self,
        matrix: &SpecificationMatrix,
        options: &mut GenerateOptions,
        seed: u64,
    ) -> Result<GeneratedExam, AgentError> {
        let mut plan = plan(RequestKind::GenerateExam, matrix.profile(), self.retry_budget);
        let request_id = self.open_request(&plan, matrix.profile())?;

        let mut gen_sub = self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Running)?;
        let mut drafts = match self.draft_exam(matrix, seed, 0, &gen_sub) {
            Ok(d) => d,
            Err(e) => {
                self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Failed)?;
                return Err(e);
            }
        };
        self.set_status(&request_id, &mut plan, 0, SubtaskStatus::Done)?;

        let mut validate_idx = 1;
        let mut round = 0u32;
        let (exam, compliance) = loop {
            self.set_status(&request_id, &mut plan, validate_idx, SubtaskStatus::Running)?;
            let mut exam = Exam::new(format!("gen-{seed}"), Provenance::Generated, drafts.iter().map(|d| d.item.clone()).collect());
            if let Some(fault) = options.fault.as_mut() {
                fault(round, &mut exam);
            }
            let report = validate_exam(&exam, matrix);
            if report.compliant && exam.check().is_ok() {
                self.set_status(&request_id, &mut plan, validate_idx, SubtaskStatus::Done)?;
                break (exam, report);
            }
            self.set_status(&request_id, &mut plan, validate_idx, SubtaskStatus::Failed)?;
            let (regen, validate) = match plan.push_regeneration(matrix.profile()) {
                Ok(ids) => ids,
                Err(_) => return Err(AgentError::NonCompliant { attempts: round + 1, violations: report.violations }),
            };
            round += 1;
            gen_sub = self.set_status(&request_id, &mut plan, regen, SubtaskStatus::Running)?;
            drafts = match self.draft_exam(matrix, seed, round, &gen_sub) {
                Ok(d) => d,
                Err(e) => {
                    self.set_status(&request_id, &mut plan, regen, SubtaskStatus::Failed)?;
                    return Err(e);
                }
            };
            self.set_status(&request_id, &mut plan, regen, SubtaskStatus::Done)?;
            validate_idx = validate;
        };

        let mut novelty = Vec::with_capacity(exam.items.len());
        let mut case_ids = Vec::with_capacity(exam.items.len());
        for (item, draft) in exam.items.iter().zip(drafts) {
            let overlap = novelty_overlap(item, &options.reference_items, DEFAULT_NGRAM)?;
            novelty.push((item.id, overlap));
            let ok = compliance.compliant && overlap <= options.novelty_threshold;
            let case = Case::new(self.bank.next_id("gen"), draft.state, item.render_prompt(), if ok { 1.0 } else { 0.0 })
                .annotate("item_id", item.id.to_string());
            case_ids.push(self.retain(&gen_sub, case, draft.query.as_ref(), &draft.retrieved)?);
        }
        Ok(GeneratedExam { exam, compliance, novelty, plan, case_ids })
    }

    fn draft_exam(&mut self, matrix: &SpecificationMatrix, seed: u64, round: u32, subtask_id: &str) -> Result<Vec<SlotDraft>, AgentError> {
        let round_seed = seed.wrapping_add(u64::from(round).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut drafts = Vec::new();
        for cell in matrix.cells().into_iter().filter(|c| c.count > 0) {
            let code = matrix.topic_code(&cell.topic).expect("cell topics are listed");
            for seq in 0..cell.count {
                let id = QuestionId::new(code, cell.section, cell.level, seq)?;
                drafts.push(self.draft_slot(id, &cell.topic, round_seed, subtask_id)?);
            }
        }
        Ok(drafts)
    }

    fn draft_slot(&mut self, id: QuestionId, topic: &str, seed: u64, subtask_id: &str) -> Result<SlotDraft, AgentError> {
        let state = slot_state_text(topic, id.section, id.level);
        let retrieved = self.retrieve(&state)?;
        let ranked = retrieved.as_ref().map(by_weight).unwrap_or_default();
        let references: Vec<String> =
            ranked.iter().filter_map(|(cid, _)| self.bank.get(cid)).map(|c| c.action_text.clone()).collect();
        let mut raw_outputs = Vec::new();
        for attempt in 0..=self.retry_budget {
            let request = GenerationRequest {
                item_id: id.to_string(),
                topic: topic.to_string(),
                topic_code: id.topic_code,
                section: id.section,
                level: id.level.as_u8(),
                attempt,
                references: references.clone(),
            };
            let completion = self.call_backend(subtask_id, GENERATOR_SYSTEM, &request.render(), seed)?;
            if let Ok(draft) = parse_draft(&completion, id.section) {
                let item = ExamItem {
                    id,
                    topic: topic.to_string(),
                    level: id.level,
                    stem: draft.stem,
                    body: draft.body,
                    solution: draft.solution,
                    explanation: draft.explanation,
                };
                if item.check().is_ok() {
                    return Ok(SlotDraft {
                        item,
                        state,
                        query: retrieved.map(|r| r.query),
                        retrieved: ranked.into_iter().map(|(cid, _)| cid).collect(),
                    });
                }
            }
            raw_outputs.push(completion);
        }
        Err(AgentError::Generation { cell: id.to_string(), raw_outputs })
    }
}

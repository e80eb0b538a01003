//! Memory ablation on a designed workload.
//!
//! Half of the items are withheld from the mock's answer key. Each withheld
//! item has an oracle case in the seeded bank carrying its key; every other
//! withheld item also has four failed cases with the identical state text,
//! retained ahead of its oracle. Without memory the withheld items are lost,
//! cosine top-K retrieval fills up with the failed look-alikes on the second
//! group, and Q-ranked retrieval pushes them out because their learned value
//! is zero. Dataset write-back is off during the run so every variant reads
//! the same seeded values.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{compute_metrics, fixtures, EvalInputs, GradedExam, HarnessError, MemoryMode, Metric, RunConfig};
use crate::agents::{AgentSession, GenerateOptions, MockBackend};
use crate::exam::{CognitiveLevel, Exam, ExamItem, ItemBody, Response, ScoringScheme, SpecificationMatrix};
use crate::memory::{Case, CaseBank};
use crate::retrieval::Embedding;

/// Failed look-alike cases per distracted item.
const DISTRACTORS: usize = 4;

/// A dataset record to seed, with `None` as the zero-embedding prior.
#[derive(Debug, Clone)]
struct SeedRecord {
    case_id: String,
    state_text: Option<String>,
    q: f64,
}

#[derive(Debug, Clone)]
pub struct AblationWorkload {
    pub exams: Vec<Exam>,
    pub mock: MockBackend,
    pub bank: CaseBank,
    /// Items the mock cannot answer without a retrieved case.
    pub withheld: usize,
    /// Withheld items shadowed by failed look-alikes.
    pub distracted: usize,
    records: Vec<SeedRecord>,
}

fn wrong_response(body: &ItemBody) -> Response {
    match body {
        ItemBody::MultipleChoice { key, .. } => Response::Choice((key + 1) % 4),
        ItemBody::TrueFalseGroup { key, .. } => Response::TrueFalse(key.map(|b| !b)),
        ItemBody::ShortAnswer { key, .. } => Response::Numeric(key + 1.0),
    }
}

/// The fixture exam plus `extra_exams` mock-generated exams, seeded bank and
/// partial answer key.
pub fn ablation_workload(matrix: &SpecificationMatrix, extra_exams: usize, seed: u64) -> Result<AblationWorkload, HarnessError> {
    let mut exams = vec![fixtures::exam_2025()?];
    let mut generator = AgentSession::new(Box::new(MockBackend::new()), CaseBank::new(), None);
    for i in 0..extra_exams {
        exams.push(generator.generate_exam(matrix, &mut GenerateOptions::default(), seed.wrapping_add(i as u64))?.exam);
    }

    let mut mock = MockBackend::new();
    let mut bank = CaseBank::new();
    let mut records = Vec::new();
    let (mut withheld, mut distracted) = (0, 0);
    let mut seed_case = |bank: &mut CaseBank, case: Case, q: f64| -> Result<(), HarnessError> {
        let stored = bank.retain(case)?;
        records.push(SeedRecord { case_id: stored.case_id.clone(), state_text: Some(stored.state_text.clone()), q });
        records.push(SeedRecord { case_id: stored.case_id.clone(), state_text: None, q: 0.0 });
        Ok(())
    };
    for (n, (exam, item)) in exams.iter().flat_map(|e| e.items.iter().map(move |i| (e, i))).enumerate() {
        if n % 2 == 0 {
            mock.learn_item(item);
            continue;
        }
        let state = item.render_prompt();
        let tag = format!("{}-{}", exam.exam_id, item.id);
        if withheld % 2 == 1 {
            for j in 0..DISTRACTORS {
                let case = Case::new(format!("distractor-{tag}-{j}"), &state, wrong_response(&item.body).render(), 0.0);
                seed_case(&mut bank, case, 0.0)?;
            }
            distracted += 1;
        }
        seed_case(&mut bank, Case::new(format!("oracle-{tag}"), &state, item.body.key_response().render(), 1.0), 1.0)?;
        withheld += 1;
    }
    Ok(AblationWorkload { exams, mock, bank, withheld, distracted, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok {
        items: usize,
        accuracy: f64,
        /// Application-level items only.
        hard_accuracy: Option<f64>,
        step_proxy: f64,
        latency_mean_s: f64,
        latency_p95_s: f64,
        retrieval_calls: u64,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: MemoryMode,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

impl AblationRow {
    pub fn accuracy(&self) -> Option<f64> {
        match self.outcome {
            RowOutcome::Ok { accuracy, .. } => Some(accuracy),
            RowOutcome::Failed { .. } => None,
        }
    }
}

/// Runs every variant of `grid` on a fresh copy of the workload. A failing
/// variant becomes a failed row.
pub fn run_ablation(workload: &AblationWorkload, grid: &[MemoryMode], base: &RunConfig) -> Vec<AblationRow> {
    grid.iter()
        .map(|&variant| AblationRow {
            variant,
            outcome: run_variant(workload, variant, base).unwrap_or_else(|e| RowOutcome::Failed { error: e.to_string() }),
        })
        .collect()
}

fn run_variant(workload: &AblationWorkload, variant: MemoryMode, base: &RunConfig) -> Result<RowOutcome, HarnessError> {
    let config = RunConfig { memory: variant, ..base.clone() };
    config.validate()?;
    let mut retriever = config.build_retriever()?;
    if let Some(r) = retriever.as_mut() {
        let dim = r.estimator().params().dim();
        for rec in &workload.records {
            let emb = rec.state_text.as_deref().map_or_else(|| Embedding::zeros(dim), |t| r.embed(t));
            r.estimator_mut().add_record(&workload.bank, &rec.case_id, emb, rec.q)?;
        }
    }
    let mut session = AgentSession::new(config.build_backend(workload.mock.clone())?, workload.bank.clone(), retriever);
    session.write_back = false;
    let scheme = ScoringScheme::default();
    let mut graded = Vec::with_capacity(workload.exams.len());
    for (i, exam) in workload.exams.iter().enumerate() {
        let start = Instant::now();
        let report = session.solve_exam(exam, &scheme, config.seed.wrapping_add(i as u64))?;
        graded.push(GradedExam {
            exam: report.exam.clone(),
            responses: report.responses(),
            completions: report.solved.iter().map(|s| s.completion.clone()).collect(),
            latency_s: Some(start.elapsed().as_secs_f64()),
        });
    }
    let hard = hard_accuracy(&graded, &scheme)?;
    let metrics = compute_metrics(&EvalInputs { graded, scheme, ..Default::default() })?;
    let value = |m: &Metric, what: &str| m.value().ok_or_else(|| HarnessError::Assertion(format!("{what} unavailable")));
    Ok(RowOutcome::Ok {
        items: metrics.items,
        accuracy: value(&metrics.item_accuracy, "accuracy")?,
        hard_accuracy: hard,
        step_proxy: value(&metrics.step_proxy, "step proxy")?,
        latency_mean_s: value(&metrics.latency_mean_s, "latency")?,
        latency_p95_s: value(&metrics.latency_p95_s, "latency")?,
        retrieval_calls: session.retrieval_calls(),
    })
}

fn hard_accuracy(graded: &[GradedExam], scheme: &ScoringScheme) -> Result<Option<f64>, HarnessError> {
    let mut hits = 0;
    let mut total = 0;
    for g in graded {
        let hard: Vec<(&ExamItem, &Response)> =
            g.exam.items.iter().zip(&g.responses).filter(|(i, _)| i.level == CognitiveLevel::Application).collect();
        for (item, response) in hard {
            total += 1;
            hits += usize::from(crate::exam::grade_item(item, response, scheme)?.is_full());
        }
    }
    Ok((total > 0).then(|| 100.0 * hits as f64 / total as f64))
}


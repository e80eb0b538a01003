use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{compute_metrics, fixtures, EvalInputs, GradedExam, HarnessError, RecordedRatings, RunConfig, RunReport};
use crate::agents::{AgentError, AgentSession, GenerateOptions, GeneratedExam, MockBackend, SolveReport, TutoringConfig, TutoringReport};
use crate::exam::{serialize_exam, Exam, ItemScore, QuestionId, Response, ScoringScheme, SpecificationMatrix};
use crate::memory::{save_bank, write_record, CaseBank};

pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const TIMINGS_FILE: &str = "timings.json";

/// Fewest exams the tutoring stage needs (two pre and two post assessments).
const TUTORING_EXAMS: usize = 4;

pub struct PipelineOutcome {
    pub report: RunReport,
    pub generated: Vec<GeneratedExam>,
    pub solved: Vec<SolveReport>,
    pub tutoring: Option<TutoringReport>,
    pub session: AgentSession,
}

/// One line of `responses.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub exam_id: String,
    pub item_id: QuestionId,
    pub response: Response,
    pub completion: String,
    pub flagged: bool,
    pub score: ItemScore,
}

/// Generate, validate, solve, grade and evaluate with one session.
///
/// With the mock backend the solver's answer key is the generated exams
/// minus every `withhold_every`-th item, counted across the whole run.
pub fn run_pipeline(
    config: &RunConfig,
    matrix: &SpecificationMatrix,
    bank: CaseBank,
    ratings: Option<RecordedRatings>,
) -> Result<PipelineOutcome, HarnessError> {
    config.validate()?;
    let scheme = ScoringScheme::default();
    let mut session = AgentSession::new(config.build_backend(MockBackend::new())?, bank, config.build_retriever()?);

    let mut options = GenerateOptions { reference_items: fixtures::exam_2025()?.items, ..Default::default() };
    let mut generated = Vec::with_capacity(config.exams);
    for i in 0..config.exams {
        let g = session.generate_exam(matrix, &mut options, config.seed.wrapping_add(i as u64))?;
        options.reference_items.extend(g.exam.items.iter().cloned());
        generated.push(g);
    }
    let exams: Vec<Exam> = generated.iter().map(|g| g.exam.clone()).collect();

    let mut solver = MockBackend::new();
    for (n, item) in exams.iter().flat_map(|e| &e.items).enumerate() {
        if config.withhold_every == 0 || (n + 1) % config.withhold_every != 0 {
            solver.learn_item(item);
        }
    }
    session.set_backend(config.build_backend(solver)?);

    let mut solved = Vec::with_capacity(exams.len());
    let mut graded = Vec::with_capacity(exams.len());
    for (i, exam) in exams.iter().enumerate() {
        let start = Instant::now();
        let report = session.solve_exam(exam, &scheme, config.seed.wrapping_add(10_000 + i as u64))?;
        graded.push(GradedExam {
            exam: report.exam.clone(),
            responses: report.responses(),
            completions: report.solved.iter().map(|s| s.completion.clone()).collect(),
            latency_s: Some(start.elapsed().as_secs_f64()),
        });
        solved.push(report);
    }

    let tutoring = if exams.len() >= TUTORING_EXAMS && config.students > 0 {
        let tc = TutoringConfig { students: config.students, seed: config.seed, ..Default::default() };
        match session.run_tutoring(&exams, matrix, &tc) {
            Ok(t) => Some(t),
            Err(AgentError::Unavailable(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    let inputs = EvalInputs {
        graded,
        scheme,
        compliance: generated.iter().map(|g| g.compliance.clone()).collect(),
        novelty: generated.iter().flat_map(|g| g.novelty.iter().map(|(_, n)| *n)).collect(),
        tutoring: tutoring.as_ref().map(|t| t.metrics.clone()),
        ratings,
    };
    let metrics = compute_metrics(&inputs)?;
    let details = json!({
        "exams": generated.iter().zip(&solved).map(|(g, s)| json!({
            "exam_id": g.exam.exam_id,
            "compliant": g.compliance.compliant,
            "violations": g.compliance.violations.len(),
            "regenerations": g.plan.regenerations(),
            "mean_overlap": g.mean_novelty(),
            "score": s.score.total,
            "set_perfect": s.score.set_perfect,
            "flagged": s.solved.iter().filter(|x| x.flagged).count(),
        })).collect::<Vec<_>>(),
        "bank_size": session.bank.len(),
        "retrieval_calls": session.retrieval_calls(),
        "log_entries": session.log.len(),
        "students_improved": tutoring.as_ref().map(|t| t.metrics.improved),
    });
    let report = RunReport::new("eval", config, Some(metrics), details)?;

    let outcome = PipelineOutcome { report, generated, solved, tutoring, session };
    if let Some(dir) = &config.out_dir {
        dump_artifacts(&outcome, &inputs, dir)?;
        outcome.report.write(dir)?;
    }
    Ok(outcome)
}

fn dump_artifacts(outcome: &PipelineOutcome, inputs: &EvalInputs, dir: &Path) -> Result<(), HarnessError> {
    let exam_dir = dir.join("exams");
    std::fs::create_dir_all(&exam_dir)?;
    for g in &outcome.generated {
        std::fs::write(exam_dir.join(format!("{}.json", g.exam.exam_id)), serialize_exam(&g.exam))?;
    }

    let mut sink = BufWriter::new(File::create(dir.join(RESPONSES_FILE))?);
    for report in &outcome.solved {
        for (s, score) in report.solved.iter().zip(&report.score.items) {
            let record = ResponseRecord {
                exam_id: report.exam.exam_id.clone(),
                item_id: s.item_id,
                response: s.response.clone(),
                completion: s.completion.clone(),
                flagged: s.flagged,
                score: score.clone(),
            };
            write_record(&mut sink, &record)?;
        }
    }
    sink.flush()?;

    let timings: Vec<_> = inputs.graded.iter().map(|g| json!({"exam_id": g.exam.exam_id, "latency_s": g.latency_s})).collect();
    std::fs::write(dir.join(TIMINGS_FILE), serde_json::to_string_pretty(&timings)?)?;
    let compliance: Vec<_> = outcome.generated.iter().map(|g| json!({"exam_id": g.exam.exam_id, "report": g.compliance, "overlap": g.novelty})).collect();
    std::fs::write(dir.join("compliance.json"), serde_json::to_string_pretty(&compliance)?)?;
    if let Some(t) = &outcome.tutoring {
        std::fs::write(dir.join("tutoring.json"), serde_json::to_string_pretty(t)?)?;
    }

    let mut bank = BufWriter::new(File::create(dir.join("bank.jsonl"))?);
    save_bank(&outcome.session.bank, &mut bank)?;
    let mut log = BufWriter::new(File::create(dir.join("session_log.jsonl"))?);
    outcome.session.log.save(&mut log)?;
    Ok(())
}


/// Simulated cohort over mock-generated assessments: two pre and two post
/// exams, practice drawn from the same items.
pub fn run_tutor_sim(config: &RunConfig, matrix: &SpecificationMatrix) -> Result<(TutoringReport, RunReport), HarnessError> {
    config.validate()?;
    let mut session = AgentSession::new(Box::new(MockBackend::new()), CaseBank::new(), config.build_retriever()?);
    let exams = (0..TUTORING_EXAMS)
        .map(|i| session.generate_exam(matrix, &mut GenerateOptions::default(), config.seed.wrapping_add(i as u64)).map(|g| g.exam))
        .collect::<Result<Vec<_>, _>>()?;
    let tc = TutoringConfig { students: config.students, seed: config.seed, ..Default::default() };
    let tutoring = session.run_tutoring(&exams, matrix, &tc)?;
    let metrics = compute_metrics(&EvalInputs { tutoring: Some(tutoring.metrics.clone()), ..Default::default() })?;
    let details = json!({
        "students": tutoring.profiles.len(),
        "improved": tutoring.metrics.improved,
        "per_student": tutoring.metrics.per_student,
        "repeated_before": tutoring.metrics.repeated_before,
        "repeated_after": tutoring.metrics.repeated_after,
    });
    let report = RunReport::new("tutor-sim", config, Some(metrics), details)?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("tutoring.json"), serde_json::to_string_pretty(&tutoring)?)?;
        report.write(dir)?;
    }
    Ok((tutoring, report))
}

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use mathprep_core::agents::{
    normalize_input, AgentError, AgentSession, GenerateOptions, MockBackend, Phase, SkillOntology, StudentProfile, StudentSimulator,
    DEFAULT_RETRY_BUDGET,
};
use mathprep_core::exam::{ItemBody, Response, ScoringScheme, Section};
use mathprep_core::harness::{
    ablation_workload, fixtures, run_ablation, run_pipeline, MemoryMode, ResponseRecord, RunConfig, RESPONSES_FILE,
};
use mathprep_core::memory::CaseBank;
use mathprep_core::mmdp::seeded_rng;

fn session(mock: MockBackend) -> AgentSession {
    AgentSession::new(Box::new(mock), CaseBank::new(), None)
}

/// Exact-match grading written out per format.
fn matches_key(body: &ItemBody, response: &Response) -> bool {
    match (body, response) {
        (ItemBody::MultipleChoice { key, .. }, Response::Choice(c)) => key == c,
        (ItemBody::TrueFalseGroup { key, .. }, Response::TrueFalse(bits)) => key == bits,
        (ItemBody::ShortAnswer { key, .. }, Response::Numeric(x)) => (key - x).abs() < 1e-9,
        _ => false,
    }
}

#[test]
fn generated_exams_follow_the_matrix() {
    let matrix = fixtures::matrix_2025().unwrap();
    let mut s = session(MockBackend::new());
    for seed in 0..5 {
        let before = s.bank.len();
        let g = s.generate_exam(&matrix, &mut GenerateOptions::default(), seed).unwrap();
        assert!(g.compliance.compliant, "seed {seed}");
        assert_eq!(g.exam.items.len(), 22);
        let ids: BTreeSet<_> = g.exam.items.iter().map(|i| i.id).collect();
        assert_eq!(ids.len(), 22, "duplicate ids for seed {seed}");
        assert_eq!(s.bank.len() - before, 22);
        assert_eq!(g.plan.regenerations(), 0);
    }
}

#[test]
fn validation_faults_trigger_bounded_regeneration() {
    let matrix = fixtures::matrix_2025().unwrap();
    let mut s = session(MockBackend::new());
    let mut options = GenerateOptions {
        fault: Some(Box::new(|round, exam| {
            if round < 2 {
                exam.items.pop();
            }
        })),
        ..Default::default()
    };
    let g = s.generate_exam(&matrix, &mut options, 3).unwrap();
    assert_eq!(g.plan.regenerations(), 2);
    assert!(g.compliance.compliant);

    let mut always = GenerateOptions { fault: Some(Box::new(|_, exam| exam.items.truncate(20))), ..Default::default() };
    match s.generate_exam(&matrix, &mut always, 4) {
        Err(AgentError::NonCompliant { attempts, violations }) => {
            assert_eq!(attempts, DEFAULT_RETRY_BUDGET + 1);
            assert!(!violations.is_empty());
        }
        other => panic!("expected a non-compliant error, got {other:?}"),
    }
}

#[test]
fn withheld_items_are_the_only_misses() {
    let exam = fixtures::exam_2025().unwrap();
    let withheld = [2usize, 9, 17];
    let mut mock = MockBackend::new();
    for (n, item) in exam.items.iter().enumerate() {
        if !withheld.contains(&n) {
            mock.learn_item(item);
        }
    }
    let mut s = session(mock);
    let report = s.solve_exam(&exam, &ScoringScheme::default(), 1).unwrap();
    let correct: Vec<usize> = exam
        .items
        .iter()
        .zip(&report.solved)
        .enumerate()
        .filter(|(_, (item, solved))| matches_key(&item.body, &solved.response))
        .map(|(n, _)| n)
        .collect();
    assert_eq!(correct.len(), 19);
    assert!(withheld.iter().all(|n| !correct.contains(n)));
    let flagged: Vec<usize> = report.solved.iter().enumerate().filter(|(_, s)| s.flagged).map(|(n, _)| n).collect();
    assert_eq!(flagged, withheld);
}

#[test]
fn plain_text_section_normalizes_to_twelve_items() {
    let matrix = fixtures::matrix_2025().unwrap();
    let items = normalize_input(fixtures::PLAIN_SECTION_I.as_bytes(), &matrix).unwrap();
    assert_eq!(items.len(), 12);
    assert!(items.iter().all(|i| i.section() == Section::I));
    assert!(normalize_input(b"\x00\x01 not an exam", &matrix).is_err());
}

#[test]
fn section_one_success_rate_at_half_mastery() {
    let matrix = fixtures::matrix_2025().unwrap();
    let ontology = SkillOntology::from_matrix(&matrix);
    let exam = fixtures::exam_2025().unwrap();
    let item = exam.items.iter().find(|i| i.section() == Section::I).unwrap();
    let skill = ontology.skill_for(&item.topic, item.level).unwrap().id.clone();
    let sim = StudentSimulator::default();
    let mut rng = seeded_rng(99);
    let trials = 40_000;
    let mut hits = 0;
    for _ in 0..trials {
        let mut p = StudentProfile::new("s", BTreeMap::from([(skill.clone(), 0.5)]));
        let (_, score) = sim.step(&mut p, &ontology, item, Phase::Pre, None, &mut rng).unwrap();
        hits += usize::from(score.is_full());
    }
    // Guess floor 1/4: 0.25 + 0.75 * 0.5.
    let rate = hits as f64 / trials as f64;
    let se = (0.625f64 * 0.375 / trials as f64).sqrt();
    assert!((rate - 0.625).abs() < 4.0 * se, "rate {rate}");
}

#[test]
fn metrics_recount_from_dumped_artifacts() {
    let matrix = fixtures::matrix_2025().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { exams: 4, withhold_every: 5, students: 6, out_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let outcome = run_pipeline(&config, &matrix, CaseBank::new(), None).unwrap();

    let text = std::fs::read_to_string(dir.path().join(RESPONSES_FILE)).unwrap();
    let records: Vec<ResponseRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 88);
    let exams: BTreeMap<String, _> = outcome.generated.iter().map(|g| (g.exam.exam_id.clone(), &g.exam)).collect();
    let correct = records
        .iter()
        .filter(|r| matches_key(&exams[&r.exam_id].item(r.item_id).unwrap().body, &r.response))
        .count();
    let accuracy = 100.0 * correct as f64 / records.len() as f64;
    let reported = outcome.report.metrics.as_ref().unwrap().item_accuracy.value().unwrap();
    assert!((accuracy - reported).abs() < 1e-9, "{accuracy} vs {reported}");
    // Items 5, 10, ... of the run are withheld: 88 / 5 rounded down.
    assert_eq!(records.len() - correct, 17);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report_hash"], outcome.report.report_hash.as_str());
    assert_eq!(report["config"]["exams"], 4);
    for name in ["timings.json", "compliance.json", "tutoring.json", "bank.jsonl", "session_log.jsonl", "report.txt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn ablation_rows_do_not_depend_on_grid_order() {
    let matrix = fixtures::matrix_2025().unwrap();
    let workload = ablation_workload(&matrix, 1, 7).unwrap();
    let base = RunConfig::default();
    let forward = run_ablation(&workload, &MemoryMode::ALL, &base);
    let reversed = run_ablation(&workload, &[MemoryMode::ReadP, MemoryMode::None, MemoryMode::ReadNp], &base);
    for row in &forward {
        let other = reversed.iter().find(|r| r.variant == row.variant).unwrap();
        assert_eq!(row.accuracy(), other.accuracy(), "{}", row.variant);
    }
    let calls = |m: MemoryMode| match &forward.iter().find(|r| r.variant == m).unwrap().outcome {
        mathprep_core::harness::RowOutcome::Ok { retrieval_calls, .. } => *retrieval_calls,
        other => panic!("{other:?}"),
    };
    assert_eq!(calls(MemoryMode::None), 0);
    assert_eq!(calls(MemoryMode::ReadNp), 44);
    assert_eq!(calls(MemoryMode::ReadP), 44);
}

#[test]
fn invalid_ablation_variant_is_a_failed_row() {
    let matrix = fixtures::matrix_2025().unwrap();
    let workload = ablation_workload(&matrix, 0, 7).unwrap();
    let rows = run_ablation(&workload, &MemoryMode::ALL, &RunConfig { k: 0, ..Default::default() });
    assert!(rows[0].accuracy().is_some());
    assert!(rows[1].accuracy().is_none() && rows[2].accuracy().is_none());
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mathprep_bench::{fill_estimator, phrase, seeded_bank};
use mathprep_core::memory::CaseBank;
use mathprep_core::retrieval::{
    td_update, Embedder, EstimatorConfig, NextState, QEstimator, RetrievalConfig, RetrievalMode, Retriever, TdTransition, TrigramEmbedder,
    DEFAULT_DIM,
};

fn retrieve(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrieve");
    for size in [100, 1000] {
        for mode in [RetrievalMode::ReadNp, RetrievalMode::ReadP] {
            let mut retriever = Retriever::with_defaults(RetrievalConfig { mode, ..Default::default() }).unwrap();
            let bank = seeded_bank(size, &mut retriever);
            let query = phrase(size + 7);
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), size), &bank, |b, bank| {
                b.iter(|| retriever.retrieve(black_box(bank), black_box(&query)).unwrap())
            });
        }
    }
    group.finish();
}

fn td_step(c: &mut Criterion) {
    let embedder = TrigramEmbedder::new(DEFAULT_DIM);
    let mut retriever = Retriever::with_defaults(RetrievalConfig::default()).unwrap();
    let bank: CaseBank = seeded_bank(16, &mut retriever);
    let mut est = QEstimator::with_dim(DEFAULT_DIM, 1.0, EstimatorConfig::default()).unwrap();
    fill_estimator(&mut est, &bank, &embedder, 8);
    let ids: Vec<String> = bank.iter().map(|c| c.case_id.clone()).collect();
    let batch: Vec<TdTransition> = (0..32)
        .map(|i| TdTransition {
            state: embedder.embed(&phrase(500 + i)),
            case_id: ids[i % ids.len()].clone(),
            reward: (i % 2) as f64,
            next: (i % 4 != 3).then(|| NextState { state: embedder.embed(&phrase(900 + i)), candidates: ids[..4].to_vec() }),
        })
        .collect();
    c.bench_function("td_update/32 transitions", |b| b.iter(|| td_update(&mut est, black_box(&batch)).unwrap()));
}

criterion_group!(benches, retrieve, td_step);
criterion_main!(benches);

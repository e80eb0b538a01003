//! Workloads shared by the criterion benches.

use mathprep_core::memory::{Case, CaseBank};
use mathprep_core::retrieval::{Embedder, QEstimator, Retriever};

const WORDS: [&str; 12] = [
    "hàm số", "tích phân", "xác suất", "mặt cầu", "đạo hàm", "cực trị", "vector", "lôgarit", "cấp số", "thống kê", "đường thẳng", "mặt phẳng",
];

/// Deterministic pseudo-exam phrase; `i` picks the words.
pub fn phrase(i: usize) -> String {
    let mut x = i.wrapping_mul(2_654_435_761) | 1;
    (0..4)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            WORDS[x % WORDS.len()]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A bank of `n` cases, each with one dataset record for its own state.
pub fn seeded_bank(n: usize, retriever: &mut Retriever) -> CaseBank {
    let mut bank = CaseBank::new();
    for i in 0..n {
        let state = phrase(i);
        let id = bank.retain(Case::new(format!("c{i}"), &state, "answer", (i % 2) as f64)).expect("unique ids").case_id.clone();
        let emb = retriever.embed(&state);
        retriever.estimator_mut().add_record(&bank, &id, emb, (i % 2) as f64).expect("known case");
    }
    bank
}

/// Fills an estimator with `per_case` records for each case of `bank`.
pub fn fill_estimator(est: &mut QEstimator, bank: &CaseBank, embedder: &dyn Embedder, per_case: usize) {
    for (n, case) in bank.iter().enumerate() {
        for j in 0..per_case {
            let q = ((n + j) % 3) as f64 / 2.0;
            est.add_record(bank, &case.case_id, embedder.embed(&phrase(n * 31 + j)), q).expect("known case");
        }
    }
}

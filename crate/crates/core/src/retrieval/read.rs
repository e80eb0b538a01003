use std::cmp::Ordering;

use super::{Embedder, Embedding, QEstimator, RetrievalError};
use crate::memory::CaseBank;

/// A retrieved case with the score it was ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCase {
    pub case_id: String,
    pub created_seq: u64,
    pub score: f64,
}

/// Descending score, then ascending creation order.
fn ranking(a: &ScoredCase, b: &ScoredCase) -> Ordering {
    b.score.total_cmp(&a.score).then(a.created_seq.cmp(&b.created_seq))
}

fn top_k(mut scored: Vec<ScoredCase>, k: usize) -> Result<Vec<ScoredCase>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::Config("K must be at least 1".into()));
    }
    scored.sort_by(ranking);
    scored.truncate(k);
    Ok(scored)
}

/// Embeddings of case state texts, kept aligned with an append-only bank.
#[derive(Debug, Clone, Default)]
pub struct CaseIndex {
    embeddings: Vec<Embedding>,
}

impl CaseIndex {
    pub fn build(bank: &CaseBank, embedder: &dyn Embedder) -> Self {
        let mut idx = CaseIndex::default();
        idx.sync(bank, embedder);
        idx
    }

    /// Embeds any cases appended since the last sync.
    pub fn sync(&mut self, bank: &CaseBank, embedder: &dyn Embedder) {
        if self.embeddings.len() > bank.len() {
            self.embeddings.clear();
        }
        let start = self.embeddings.len();
        self.embeddings.extend(bank.cases()[start..].iter().map(|c| embedder.embed(&c.state_text)));
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embedding(&self, position: usize) -> Option<&Embedding> {
        self.embeddings.get(position)
    }
}

/// Top-K bank cases by cosine similarity to `query`.
pub fn read_np(index: &CaseIndex, bank: &CaseBank, query: &Embedding, k: usize) -> Result<Vec<ScoredCase>, RetrievalError> {
    if index.len() != bank.len() {
        return Err(RetrievalError::Shape(format!("index holds {} cases, bank {}", index.len(), bank.len())));
    }
    let scored = bank
        .iter()
        .zip(&index.embeddings)
        .map(|(case, emb)| {
            if emb.dim() != query.dim() {
                return Err(RetrievalError::Shape(format!("query dimension {} vs {}", query.dim(), emb.dim())));
            }
            Ok(ScoredCase { case_id: case.case_id.clone(), created_seq: case.created_seq, score: query.cosine(emb) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    top_k(scored, k)
}

/// Top-K bank cases by `Q_EC(query, c)`; cases with no records score the prior.
pub fn read_p(bank: &CaseBank, estimator: &QEstimator, query: &Embedding, k: usize) -> Result<Vec<ScoredCase>, RetrievalError> {
    let all = bank
        .iter()
        .map(|c| ScoredCase { case_id: c.case_id.clone(), created_seq: c.created_seq, score: 0.0 })
        .collect();
    rank_by_q(estimator, query, all, k)
}

/// Rescores `candidates` by `Q_EC(query, c)` and keeps the top K.
pub fn rank_by_q(estimator: &QEstimator, query: &Embedding, candidates: Vec<ScoredCase>, k: usize) -> Result<Vec<ScoredCase>, RetrievalError> {
    let scored = candidates
        .into_iter()
        .map(|mut c| {
            c.score = estimator.q_ec(query, &c.case_id)?.value;
            Ok(c)
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    top_k(scored, k)
}

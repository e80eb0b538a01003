//! Embeddings, the kernel Q estimator, the softmax retrieval policy and the
//! two retrieval modes.

mod embedding;
mod estimator;
mod kernel;
mod policy;
mod read;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::{Embedder, Embedding, TrigramEmbedder, DEFAULT_DIM};
pub use estimator::{q_values, Backup, EstimatorConfig, Params, QEstimator, QValue, Record, CHECKPOINT_VERSION};
pub use kernel::{kernel_value, log_kernel, KernelParams, TargetParams, PARAM_FLOOR};
pub use policy::{entropy, log_sum_exp, softmax};
pub use read::{rank_by_q, read_np, read_p, CaseIndex, ScoredCase};
pub use train::{
    ce_loss, ce_update, kernel_gradient, td_loss, td_target, td_update, CeSample, KernelGradient, NextState, Objective,
    TdTransition, CE_EPSILON,
};

use crate::memory::CaseBank;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    /// Cosine nearest neighbours.
    #[default]
    ReadNp,
    /// Highest learned Q.
    ReadP,
}

impl std::str::FromStr for RetrievalMode {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "readnp" => Ok(RetrievalMode::ReadNp),
            "readp" => Ok(RetrievalMode::ReadP),
            other => Err(RetrievalError::Config(format!("unknown retrieval mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub k: usize,
    pub alpha: f64,
    /// Size of the nearest-neighbour candidate set that ReadP rescores.
    #[serde(default = "default_k_pre")]
    pub k_pre: usize,
}

fn default_k_pre() -> usize {
    32
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { mode: RetrievalMode::ReadNp, k: 4, alpha: 1.0, k_pre: default_k_pre() }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k == 0 {
            return Err(RetrievalError::Config("K must be at least 1".into()));
        }
        if self.k_pre < self.k {
            return Err(RetrievalError::Config(format!("K_pre ({}) must be at least K ({})", self.k_pre, self.k)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(RetrievalError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Outcome of one retrieval: the chosen cases and `μ` over them.
///
/// ReadNP weighs its neighbours uniformly. ReadP takes the `k_pre` nearest
/// cases as the candidate set, keeps the K with highest Q and uses the
/// softmax over those K.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub query: Embedding,
    pub cases: Vec<ScoredCase>,
    pub mu: Vec<f64>,
}

/// Embedder, estimator and index bundled behind one retrieval call.
pub struct Retriever {
    config: RetrievalConfig,
    embedder: Box<dyn Embedder>,
    estimator: QEstimator,
    index: CaseIndex,
    calls: u64,
}

impl std::fmt::Debug for Retriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Retriever")
            .field("config", &self.config)
            .field("dim", &self.embedder.dim())
            .field("calls", &self.calls)
            .finish_non_exhaustive()
    }
}

impl Retriever {
    pub fn new(config: RetrievalConfig, embedder: Box<dyn Embedder>, estimator: QEstimator) -> Result<Self, RetrievalError> {
        config.validate()?;
        if embedder.dim() != estimator.params().dim() {
            return Err(RetrievalError::Shape(format!(
                "embedder dimension {} differs from kernel dimension {}",
                embedder.dim(),
                estimator.params().dim()
            )));
        }
        Ok(Retriever { config, embedder, estimator, index: CaseIndex::default(), calls: 0 })
    }

    /// Trigram embedder with an isotropic kernel, all defaults.
    pub fn with_defaults(config: RetrievalConfig) -> Result<Self, RetrievalError> {
        let embedder = TrigramEmbedder::default();
        let est = QEstimator::with_dim(embedder.dim(), 1.0, EstimatorConfig { alpha: config.alpha, ..Default::default() })?;
        Retriever::new(config, Box::new(embedder), est)
    }

    pub fn config(&self) -> &RetrievalConfig {
        &self.config
    }

    pub fn estimator(&self) -> &QEstimator {
        &self.estimator
    }

    pub fn estimator_mut(&mut self) -> &mut QEstimator {
        &mut self.estimator
    }

    pub fn embed(&self, text: &str) -> Embedding {
        self.embedder.embed(text)
    }

    /// Number of `retrieve` calls served.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn retrieve(&mut self, bank: &CaseBank, query_text: &str) -> Result<Retrieved, RetrievalError> {
        self.calls += 1;
        self.index.sync(bank, self.embedder.as_ref());
        let query = self.embedder.embed(query_text);
        let (cases, mu) = match self.config.mode {
            RetrievalMode::ReadNp => {
                let cases = read_np(&self.index, bank, &query, self.config.k)?;
                let mu = vec![1.0 / cases.len() as f64; cases.len()];
                (cases, mu)
            }
            RetrievalMode::ReadP => {
                let pool = read_np(&self.index, bank, &query, self.config.k_pre)?;
                let cases = rank_by_q(&self.estimator, &query, pool, self.config.k)?;
                let mu = if cases.is_empty() {
                    Vec::new()
                } else {
                    let q: Vec<f64> = cases.iter().map(|c| c.score).collect();
                    softmax(&q, self.config.alpha)?
                };
                (cases, mu)
            }
        };
        Ok(Retrieved { query, cases, mu })
    }
}

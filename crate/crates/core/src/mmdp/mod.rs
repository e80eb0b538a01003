//! Memory-based decision process: environments, the case-based policy and
//! the retrieve / reuse / evaluate / retain episode loop.

mod envs;
mod episode;
mod policy;
mod reward;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use envs::{ChainMdp, ContextualBandit, CHAIN_ACTIONS};
pub use episode::{
    discounted_return, dump_trajectory, entropy_regularized_return, load_trajectory, mc_returns, run_episode, EpisodeConfig,
    Step, Trajectory,
};
pub use policy::{cbr_action, mixture, ActionDistribution, CbrDecision, ReuseProposer, Selection, UniformProposer};
pub use reward::{composite_reward, CompositeRewardConfig};

use crate::memory::{Case, MemoryError};
use crate::retrieval::RetrievalError;

/// Seeded generator threaded through every stochastic call.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    rand::SeedableRng::seed_from_u64(seed)
}

#[derive(Debug, Error)]
pub enum MmdpError {
    #[error("proposer contract violated: {0}")]
    Contract(String),
    #[error("environment failed: {0}")]
    Environment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Text rendering of a state plus structured annotations. The text is what
/// gets embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

impl EnvState {
    pub fn new(text: impl Into<String>) -> Self {
        EnvState { text: text.into(), annotations: BTreeMap::new() }
    }

    pub fn annotate(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.annotations.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentAction {
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

impl AgentAction {
    pub fn new(text: impl Into<String>) -> Self {
        AgentAction { text: text.into(), annotations: BTreeMap::new() }
    }
}

/// Result of one environment step; `next = None` is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Option<EnvState>,
    pub reward: f64,
}

pub trait Environment {
    fn initial_state(&mut self, rng: &mut SeededRng) -> EnvState;
    fn step(&mut self, state: &EnvState, action: &AgentAction, rng: &mut SeededRng) -> Result<StepOutcome, MmdpError>;
}

/// `p_LLM(a | s, c)`: a distribution over actions given a state and
/// optionally one retrieved case (`None` on a cold start).
pub trait ActionProposer {
    fn propose(&self, state: &EnvState, case: Option<&Case>) -> Result<ActionDistribution, MmdpError>;
}

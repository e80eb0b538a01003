//! Kernel training on the three-state chain, checked against value iteration.
//!
//! One greedy episode walks the chain; its Monte-Carlo returns seed the
//! dataset of a single "advance" case, and TD updates then sharpen the kernel
//! until the start-state value matches the Bellman optimum.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::memory::{Case, CaseBank};
use crate::mmdp::{
    mc_returns, run_episode, seeded_rng, ChainMdp, EpisodeConfig, ReuseProposer, Selection, CHAIN_ACTIONS,
};
use crate::retrieval::{
    td_update, EstimatorConfig, NextState, QEstimator, RetrievalConfig, Retriever, TdTransition, TrigramEmbedder,
    DEFAULT_DIM,
};

const CHAIN_STATES: usize = 3;
const STRATEGY_CASE: &str = "strategy-advance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainTrainingConfig {
    pub seed: u64,
    pub gamma: f64,
    pub length_scale: f64,
    pub step_size: f64,
    pub sync_every: u64,
    pub max_updates: u64,
    /// Training stops once the start-state value is this close to the optimum.
    pub tolerance: f64,
}

impl Default for ChainTrainingConfig {
    fn default() -> Self {
        ChainTrainingConfig { seed: 7, gamma: 0.9, length_scale: 1.0, step_size: 0.05, sync_every: 50, max_updates: 5000, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTraining {
    pub episode_rewards: Vec<f64>,
    pub oracle: f64,
    pub initial_q: f64,
    pub final_q: f64,
    pub updates: u64,
    pub converged: bool,
    /// Start-state value after every `sync_every` updates.
    pub trace: Vec<f64>,
    pub final_loss: f64,
}

/// Optimal state values of the chain by Bellman iteration to a fixed point.
pub fn chain_value_iteration(gamma: f64) -> Result<[f64; CHAIN_STATES], HarnessError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(HarnessError::Config(format!("gamma must be in [0, 1), got {gamma}")));
    }
    let mut v = [0.0; CHAIN_STATES];
    loop {
        let mut next = [0.0; CHAIN_STATES];
        for (s, slot) in next.iter_mut().enumerate() {
            let advance = if s + 1 == CHAIN_STATES { 1.0 } else { gamma * v[s + 1] };
            let stay = gamma * v[s];
            *slot = advance.max(stay);
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-15 {
            return Ok(v);
        }
    }
}

pub fn train_chain(config: &ChainTrainingConfig) -> Result<ChainTraining, HarnessError> {
    let est_config = EstimatorConfig {
        gamma: config.gamma,
        step_size: config.step_size,
        sync_every: config.sync_every,
        ..Default::default()
    };
    let estimator = QEstimator::with_dim(DEFAULT_DIM, config.length_scale, est_config.clone())?;
    let mut retriever = Retriever::new(RetrievalConfig::default(), Box::new(TrigramEmbedder::new(DEFAULT_DIM)), estimator)?;

    let mut episode_bank = CaseBank::new();
    let proposer = ReuseProposer { actions: CHAIN_ACTIONS.map(String::from).to_vec(), epsilon: 0.0 };
    let episode = EpisodeConfig { gamma: config.gamma, horizon: 10, selection: Selection::Greedy, case_prefix: "chain".into() };
    let mut rng = seeded_rng(config.seed);
    let trajectory = run_episode(&mut ChainMdp, &mut episode_bank, &mut retriever, &proposer, &episode, &mut rng)?;
    if let Some(reason) = &trajectory.aborted {
        return Err(HarnessError::Assertion(format!("chain episode aborted: {reason}")));
    }
    let rewards = trajectory.rewards();
    let returns = mc_returns(&rewards, config.gamma);
    let states: Vec<_> = trajectory.steps.iter().map(|s| retriever.embed(&s.state.text)).collect();

    let mut bank = CaseBank::new();
    bank.retain(Case::new(STRATEGY_CASE, "walk the chain", CHAIN_ACTIONS[0], 1.0))?;
    let mut est = QEstimator::with_dim(DEFAULT_DIM, config.length_scale, est_config)?;
    for (s, g) in states.iter().zip(&returns) {
        est.add_record(&bank, STRATEGY_CASE, s.clone(), *g)?;
    }
    let batch: Vec<TdTransition> = (0..states.len())
        .map(|t| TdTransition {
            state: states[t].clone(),
            case_id: STRATEGY_CASE.into(),
            reward: rewards[t],
            next: states.get(t + 1).map(|s| NextState { state: s.clone(), candidates: vec![STRATEGY_CASE.into()] }),
        })
        .collect();

    let oracle = chain_value_iteration(config.gamma)?[0];
    let start_q = |e: &QEstimator| e.q_ec(&states[0], STRATEGY_CASE).map(|q| q.value);
    let initial_q = start_q(&est)?;
    let mut trace = vec![initial_q];
    let mut q = initial_q;
    let mut final_loss = f64::NAN;
    while (q - oracle).abs() > config.tolerance && est.updates() < config.max_updates {
        final_loss = td_update(&mut est, &batch)?;
        q = start_q(&est)?;
        if config.sync_every > 0 && est.updates() % config.sync_every == 0 {
            trace.push(q);
        }
    }
    Ok(ChainTraining {
        episode_rewards: rewards,
        oracle,
        initial_q,
        final_q: q,
        updates: est.updates(),
        converged: (q - oracle).abs() <= config.tolerance,
        trace,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_iteration_fixed_point() {
        let v = chain_value_iteration(0.5).unwrap();
        assert_eq!(v, [0.25, 0.5, 1.0]);
        assert!(chain_value_iteration(1.0).is_err());
    }
}

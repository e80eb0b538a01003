use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{cbr_action, ActionProposer, AgentAction, EnvState, Environment, MmdpError, SeededRng, Selection};
use crate::memory::{read_records, write_record, Case, CaseBank, LoadOptions};
use crate::retrieval::{entropy, Embedding, Retriever};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub gamma: f64,
    pub horizon: usize,
    pub selection: Selection,
    /// Prefix for ids of retained cases.
    pub case_prefix: String,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { gamma: 0.9, horizon: 10, selection: Selection::Sample, case_prefix: "case".into() }
    }
}

fn check_gamma(gamma: f64) -> Result<(), MmdpError> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(MmdpError::Config(format!("gamma must be in [0, 1), got {gamma}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub state: EnvState,
    pub retrieved: Vec<String>,
    pub mu: Option<Vec<f64>>,
    pub action: AgentAction,
    pub action_probability: f64,
    pub reward: f64,
    pub next_state: Option<EnvState>,
    /// Id under which this step was retained.
    pub case_id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Set when the environment failed mid-episode.
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// `G_t = Σ_k γ^k r_{t+k}` for every t.
pub fn mc_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        g = r + gamma * g;
        out[i] = g;
    }
    out
}

pub fn discounted_return(trajectory: &Trajectory, gamma: f64) -> Result<f64, MmdpError> {
    check_gamma(gamma)?;
    Ok(mc_returns(&trajectory.rewards(), gamma).first().copied().unwrap_or(0.0))
}

/// `Σ_t (r_t + α H(μ_t))`, discounted by `γ^t` when `gamma` is given.
pub fn entropy_regularized_return(trajectory: &Trajectory, alpha: f64, gamma: Option<f64>) -> Result<f64, MmdpError> {
    if let Some(g) = gamma {
        check_gamma(g)?;
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for step in &trajectory.steps {
        let mu = step
            .mu
            .as_deref()
            .ok_or_else(|| MmdpError::Contract(format!("step {} has no stored retrieval distribution", step.t)))?;
        total += discount * (step.reward + alpha * entropy(mu)?);
        discount *= gamma.unwrap_or(1.0);
    }
    Ok(total)
}

/// Runs one episode of retrieve, act, evaluate, retain.
///
/// Every executed step is retained in `bank`. When the episode finishes
/// without an environment failure, each retrieved case and each retained
/// case receives a dataset record `(embed(s_t), G_t)`.
pub fn run_episode(
    env: &mut dyn Environment,
    bank: &mut CaseBank,
    retriever: &mut Retriever,
    proposer: &dyn ActionProposer,
    config: &EpisodeConfig,
    rng: &mut SeededRng,
) -> Result<Trajectory, MmdpError> {
    check_gamma(config.gamma)?;
    if config.horizon == 0 {
        return Err(MmdpError::Config("horizon must be at least 1".into()));
    }
    let mut traj = Trajectory::default();
    let mut queries: Vec<Embedding> = Vec::new();
    let mut state = env.initial_state(rng);
    for t in 0..config.horizon {
        let decision = cbr_action(&state, bank, retriever, proposer, config.selection, rng)?;
        let outcome = match env.step(&state, &decision.action, rng) {
            Ok(o) => o,
            Err(e) => {
                traj.aborted = Some(e.to_string());
                break;
            }
        };
        if !outcome.reward.is_finite() {
            traj.aborted = Some(format!("non-finite reward at step {t}"));
            break;
        }
        let mut case = Case::new(bank.next_id(&config.case_prefix), &state.text, &decision.action.text, outcome.reward);
        if let Some(next) = &outcome.next {
            case = case.with_next_state(&next.text);
        }
        let case_id = bank.retain(case)?.case_id.clone();
        queries.push(decision.query);
        traj.steps.push(Step {
            t,
            state: state.clone(),
            retrieved: decision.retrieved.into_iter().map(|c| c.case_id).collect(),
            mu: decision.mu,
            action: decision.action,
            action_probability: decision.probability,
            reward: outcome.reward,
            next_state: outcome.next.clone(),
            case_id,
        });
        match outcome.next {
            Some(next) => state = next,
            None => break,
        }
    }
    if traj.aborted.is_none() {
        let returns = mc_returns(&traj.rewards(), config.gamma);
        let est = retriever.estimator_mut();
        for ((step, query), g) in traj.steps.iter().zip(queries).zip(returns) {
            for id in step.retrieved.iter().chain(std::iter::once(&step.case_id)) {
                est.add_record(bank, id, query.clone(), g)?;
            }
        }
    }
    Ok(traj)
}

/// Writes one JSON line per step, μ included.
pub fn dump_trajectory<W: Write>(trajectory: &Trajectory, mut sink: W) -> Result<(), MmdpError> {
    for step in &trajectory.steps {
        write_record(&mut sink, step)?;
    }
    sink.flush().map_err(crate::memory::MemoryError::from)?;
    Ok(())
}

pub fn load_trajectory<R: Read>(source: R) -> Result<Trajectory, MmdpError> {
    let (steps, _) = read_records::<Step, _>(source, LoadOptions::default())?;
    Ok(Trajectory { steps, aborted: None })
}

use rand::Rng;

use super::{ActionProposer, AgentAction, EnvState, MmdpError, SeededRng};
use crate::memory::{Case, CaseBank};
use crate::retrieval::{Embedding, Retriever, ScoredCase};

/// Finite distribution over actions, in proposal order.
pub type ActionDistribution = Vec<(AgentAction, f64)>;

const NORMALIZATION_TOL: f64 = 1e-9;

fn check_distribution(dist: &ActionDistribution) -> Result<(), MmdpError> {
    if dist.is_empty() {
        return Err(MmdpError::Contract("proposer returned no actions".into()));
    }
    if dist.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
        return Err(MmdpError::Contract("proposer returned a negative or non-finite probability".into()));
    }
    let total: f64 = dist.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(MmdpError::Contract(format!("proposer probabilities sum to {total}")));
    }
    Ok(())
}

/// `π(a) = Σ_c μ(c) · p(a | c)`, merging equal actions in first-seen order.
pub fn mixture(mu: &[f64], components: &[ActionDistribution]) -> Result<ActionDistribution, MmdpError> {
    if mu.len() != components.len() {
        return Err(MmdpError::Contract(format!("{} weights for {} components", mu.len(), components.len())));
    }
    let mut out: ActionDistribution = Vec::new();
    for (w, dist) in mu.iter().zip(components) {
        check_distribution(dist)?;
        for (action, p) in dist {
            match out.iter_mut().find(|(a, _)| a == action) {
                Some((_, acc)) => *acc += w * p,
                None => out.push((action.clone(), w * p)),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Draw from the mixture with the seeded generator.
    #[default]
    Sample,
    /// Most probable action, earliest on ties.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbrDecision {
    pub action: AgentAction,
    pub probability: f64,
    pub distribution: ActionDistribution,
    pub retrieved: Vec<ScoredCase>,
    /// `None` on a cold start, when nothing was retrieved.
    pub mu: Option<Vec<f64>>,
    pub query: Embedding,
}

fn select(dist: &ActionDistribution, selection: Selection, rng: &mut SeededRng) -> usize {
    match selection {
        Selection::Greedy => {
            let mut best = 0;
            for (i, (_, p)) in dist.iter().enumerate() {
                if *p > dist[best].1 {
                    best = i;
                }
            }
            best
        }
        Selection::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, (_, p)) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            dist.iter().rposition(|(_, p)| *p > 0.0).unwrap_or(0)
        }
    }
}

/// Retrieves cases for `state`, mixes the proposer over them and picks an action.
pub fn cbr_action(
    state: &EnvState,
    bank: &CaseBank,
    retriever: &mut Retriever,
    proposer: &dyn ActionProposer,
    selection: Selection,
    rng: &mut SeededRng,
) -> Result<CbrDecision, MmdpError> {
    let retrieved = retriever.retrieve(bank, &state.text)?;
    let (distribution, mu) = if retrieved.cases.is_empty() {
        let dist = proposer.propose(state, None)?;
        check_distribution(&dist)?;
        (dist, None)
    } else {
        let components = retrieved
            .cases
            .iter()
            .map(|c| proposer.propose(state, bank.get(&c.case_id)))
            .collect::<Result<Vec<_>, _>>()?;
        (mixture(&retrieved.mu, &components)?, Some(retrieved.mu))
    };
    let idx = select(&distribution, selection, rng);
    let (action, probability) = distribution[idx].clone();
    Ok(CbrDecision { action, probability, distribution, retrieved: retrieved.cases, mu, query: retrieved.query })
}

/// Uniform over a fixed action set, ignoring cases.
#[derive(Debug, Clone)]
pub struct UniformProposer {
    pub actions: Vec<String>,
}

impl ActionProposer for UniformProposer {
    fn propose(&self, _: &EnvState, _: Option<&Case>) -> Result<ActionDistribution, MmdpError> {
        if self.actions.is_empty() {
            return Err(MmdpError::Config("empty action set".into()));
        }
        let p = 1.0 / self.actions.len() as f64;
        Ok(self.actions.iter().map(|a| (AgentAction::new(a.as_str()), p)).collect())
    }
}

/// Reuses the action of a successful retrieved case with probability
/// `1 - epsilon`, spreading `epsilon` uniformly. Failed or missing cases give
/// the uniform distribution.
#[derive(Debug, Clone)]
pub struct ReuseProposer {
    pub actions: Vec<String>,
    pub epsilon: f64,
}

impl ActionProposer for ReuseProposer {
    fn propose(&self, state: &EnvState, case: Option<&Case>) -> Result<ActionDistribution, MmdpError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(MmdpError::Config(format!("epsilon must be in [0, 1], got {}", self.epsilon)));
        }
        let mut dist = UniformProposer { actions: self.actions.clone() }.propose(state, None)?;
        let reuse = case.filter(|c| c.success).and_then(|c| self.actions.iter().position(|a| *a == c.action_text));
        if let Some(i) = reuse {
            let n = self.actions.len() as f64;
            for (j, (_, p)) in dist.iter_mut().enumerate() {
                *p = self.epsilon / n + if i == j { 1.0 - self.epsilon } else { 0.0 };
            }
        }
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> ActionDistribution {
        pairs.iter().map(|(a, p)| (AgentAction::new(*a), *p)).collect()
    }

    #[test]
    fn single_component_is_identity() {
        let d = dist(&[("x", 0.3), ("y", 0.7)]);
        assert_eq!(mixture(&[1.0], std::slice::from_ref(&d)).unwrap(), d);
    }

    #[test]
    fn deterministic_components_collapse() {
        let d = dist(&[("x", 1.0)]);
        let m = mixture(&[0.2, 0.5, 0.3], &[d.clone(), d.clone(), d]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_component_is_contract_error() {
        let bad = dist(&[("x", 0.5), ("y", 0.4)]);
        assert!(matches!(mixture(&[1.0], &[bad]), Err(MmdpError::Contract(_))));
    }

    #[test]
    fn reuse_proposer_prefers_successful_action() {
        let p = ReuseProposer { actions: vec!["a".into(), "b".into()], epsilon: 0.2 };
        let ok = Case::new("c", "s", "b", 1.0);
        let d = p.propose(&EnvState::new("s"), Some(&ok)).unwrap();
        assert!((d[1].1 - 0.9).abs() < 1e-15);
        let failed = Case::new("c", "s", "b", 0.0);
        let d = p.propose(&EnvState::new("s"), Some(&failed)).unwrap();
        assert_eq!(d[0].1, 0.5);
    }

    #[test]
    fn sampling_follows_cumulative_mass() {
        let d = dist(&[("x", 0.0), ("y", 1.0)]);
        let mut rng = super::super::seeded_rng(3);
        for _ in 0..20 {
            assert_eq!(select(&d, Selection::Sample, &mut rng), 1);
        }
        assert_eq!(select(&dist(&[("x", 0.5), ("y", 0.5)]), Selection::Greedy, &mut rng), 0);
    }
}

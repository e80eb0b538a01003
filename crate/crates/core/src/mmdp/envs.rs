//! Toy environments with closed-form optima.

use rand::Rng;

use super::{AgentAction, EnvState, Environment, MmdpError, SeededRng, StepOutcome};

pub const CHAIN_ACTIONS: [&str; 2] = ["advance", "stay"];

const CHAIN_TEXTS: [&str; 3] = [
    "start of the chain, two moves from the goal",
    "middle of the chain, one move left",
    "last square before the goal",
];

/// Three states in a row. `advance` moves right (leaving the last state ends
/// the episode with reward 1), `stay` stays put with reward 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainMdp;

impl ChainMdp {
    pub fn state(position: usize) -> EnvState {
        EnvState::new(CHAIN_TEXTS[position]).annotate("position", position.to_string())
    }

    fn position(state: &EnvState) -> Result<usize, MmdpError> {
        state
            .annotations
            .get("position")
            .and_then(|p| p.parse().ok())
            .filter(|p: &usize| *p < CHAIN_TEXTS.len())
            .ok_or_else(|| MmdpError::Environment(format!("not a chain state: {:?}", state.text)))
    }
}

impl Environment for ChainMdp {
    fn initial_state(&mut self, _: &mut SeededRng) -> EnvState {
        ChainMdp::state(0)
    }

    fn step(&mut self, state: &EnvState, action: &AgentAction, _: &mut SeededRng) -> Result<StepOutcome, MmdpError> {
        let pos = ChainMdp::position(state)?;
        match action.text.as_str() {
            "stay" => Ok(StepOutcome { next: Some(state.clone()), reward: 0.0 }),
            "advance" if pos + 1 == CHAIN_TEXTS.len() => Ok(StepOutcome { next: None, reward: 1.0 }),
            "advance" => Ok(StepOutcome { next: Some(ChainMdp::state(pos + 1)), reward: 0.0 }),
            other => Err(MmdpError::Environment(format!("unknown chain action {other:?}"))),
        }
    }
}

/// One-step bandit: the context names the paying arm.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContextualBandit;

impl ContextualBandit {
    pub const ARMS: [&'static str; 2] = ["pull left", "pull right"];

    pub fn state(context: usize) -> EnvState {
        let side = ["left", "right"][context];
        EnvState::new(format!("the {side} arm pays today")).annotate("context", context.to_string())
    }
}

impl Environment for ContextualBandit {
    fn initial_state(&mut self, rng: &mut SeededRng) -> EnvState {
        ContextualBandit::state(rng.random_range(0..2))
    }

    fn step(&mut self, state: &EnvState, action: &AgentAction, _: &mut SeededRng) -> Result<StepOutcome, MmdpError> {
        let ctx: usize = state
            .annotations
            .get("context")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| MmdpError::Environment("bandit state without context".into()))?;
        let arm = Self::ARMS
            .iter()
            .position(|a| *a == action.text)
            .ok_or_else(|| MmdpError::Environment(format!("unknown arm {:?}", action.text)))?;
        Ok(StepOutcome { next: None, reward: if arm == ctx { 1.0 } else { 0.0 } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmdp::seeded_rng;

    #[test]
    fn chain_advances_to_reward() {
        let mut env = ChainMdp;
        let mut rng = seeded_rng(0);
        let mut s = env.initial_state(&mut rng);
        let adv = AgentAction::new("advance");
        let mut rewards = Vec::new();
        loop {
            let out = env.step(&s, &adv, &mut rng).unwrap();
            rewards.push(out.reward);
            match out.next {
                Some(n) => s = n,
                None => break,
            }
        }
        assert_eq!(rewards, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn bandit_pays_matching_arm() {
        let mut env = ContextualBandit;
        let mut rng = seeded_rng(0);
        let s = ContextualBandit::state(1);
        assert_eq!(env.step(&s, &AgentAction::new("pull right"), &mut rng).unwrap().reward, 1.0);
        assert_eq!(env.step(&s, &AgentAction::new("pull left"), &mut rng).unwrap().reward, 0.0);
        assert!(env.step(&s, &AgentAction::new("kick"), &mut rng).is_err());
    }
}

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::MemoryError;

/// One episodic experience `(s, a, r, s')`. State and action are text so that
/// natural-language states can be embedded directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub state_text: String,
    pub action_text: String,
    pub reward: f64,
    #[serde(default)]
    pub next_state_text: Option<String>,
    pub success: bool,
    /// Assigned by the bank on retain.
    #[serde(default)]
    pub created_seq: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

impl Case {
    pub fn new(case_id: impl Into<String>, state_text: impl Into<String>, action_text: impl Into<String>, reward: f64) -> Self {
        Case {
            case_id: case_id.into(),
            state_text: state_text.into(),
            action_text: action_text.into(),
            reward,
            next_state_text: None,
            success: reward > 0.0,
            created_seq: 0,
            annotations: BTreeMap::new(),
        }
    }

    pub fn with_next_state(mut self, next: impl Into<String>) -> Self {
        self.next_state_text = Some(next.into());
        self
    }

    pub fn with_success(mut self, success: bool) -> Self {
        self.success = success;
        self
    }

    pub fn annotate(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.annotations.insert(key.into(), value.into());
        self
    }
}

/// Online-growing, append-only case bank.
///
/// The public surface offers no mutation or removal of stored cases; the only
/// write is [`CaseBank::retain`]. Clones are independent snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseBank {
    cases: Vec<Case>,
    index: HashMap<String, usize>,
    next_seq: u64,
    capacity: Option<usize>,
}

impl CaseBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// A bank that refuses retains beyond `capacity` cases. Off by default.
    pub fn with_capacity_limit(capacity: usize) -> Self {
        CaseBank { capacity: Some(capacity), ..Self::default() }
    }

    /// Appends `case`, assigning the next `created_seq`. Failed experiences
    /// are retained like successful ones.
    pub fn retain(&mut self, mut case: Case) -> Result<&Case, MemoryError> {
        if !case.reward.is_finite() {
            return Err(MemoryError::InvalidCase(format!("case {} has a non-finite reward", case.case_id)));
        }
        if self.index.contains_key(&case.case_id) {
            return Err(MemoryError::Conflict(case.case_id));
        }
        if let Some(cap) = self.capacity {
            if self.cases.len() >= cap {
                return Err(MemoryError::Full(cap));
            }
        }
        case.created_seq = self.next_seq;
        self.next_seq += 1;
        self.index.insert(case.case_id.clone(), self.cases.len());
        self.cases.push(case);
        Ok(self.cases.last().expect("just pushed"))
    }

    /// Rebuilds a bank from stored cases, keeping their sequence numbers.
    pub(crate) fn from_stored(cases: Vec<Case>) -> Result<Self, MemoryError> {
        let mut bank = CaseBank::new();
        for case in cases {
            if !case.reward.is_finite() {
                return Err(MemoryError::InvalidCase(format!("case {} has a non-finite reward", case.case_id)));
            }
            if bank.cases.last().is_some_and(|last| last.created_seq >= case.created_seq) {
                return Err(MemoryError::InvalidCase(format!(
                    "case {} breaks the increasing created_seq order",
                    case.case_id
                )));
            }
            if bank.index.insert(case.case_id.clone(), bank.cases.len()).is_some() {
                return Err(MemoryError::Conflict(case.case_id));
            }
            bank.next_seq = case.created_seq + 1;
            bank.cases.push(case);
        }
        Ok(bank)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn get(&self, case_id: &str) -> Option<&Case> {
        self.index.get(case_id).map(|&i| &self.cases[i])
    }

    pub fn contains(&self, case_id: &str) -> bool {
        self.index.contains_key(case_id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Case> {
        self.cases.iter()
    }

    /// Next free id of the form `<prefix>-<n>`.
    pub fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.next_seq)
    }
}

impl<'a> IntoIterator for &'a CaseBank {
    type Item = &'a Case;
    type IntoIter = std::slice::Iter<'a, Case>;

    fn into_iter(self) -> Self::IntoIter {
        self.cases.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retain_on_empty() {
        let mut bank = CaseBank::new();
        bank.retain(Case::new("c1", "s", "a", 0.0)).unwrap();
        assert_eq!(bank.len(), 1);
    }

    #[test]
    fn failures_are_retained() {
        let mut bank = CaseBank::new();
        let c = bank.retain(Case::new("fail", "s", "a", 0.0).with_success(false)).unwrap();
        assert!(!c.success);
        assert!(bank.contains("fail"));
    }

    #[test]
    fn duplicate_is_conflict() {
        let mut bank = CaseBank::new();
        bank.retain(Case::new("x", "s", "a", 1.0)).unwrap();
        assert!(matches!(bank.retain(Case::new("x", "s2", "a2", 1.0)), Err(MemoryError::Conflict(_))));
        assert_eq!(bank.len(), 1);
    }

    #[test]
    fn thousand_retains_have_increasing_seq() {
        let mut bank = CaseBank::new();
        for i in 0..1000 {
            bank.retain(Case::new(format!("c{i}"), "s", "a", i as f64)).unwrap();
        }
        assert_eq!(bank.len(), 1000);
        assert!(bank.cases().windows(2).all(|w| w[0].created_seq < w[1].created_seq));
    }

    #[test]
    fn non_finite_reward_rejected() {
        let mut bank = CaseBank::new();
        assert!(bank.retain(Case::new("x", "s", "a", f64::INFINITY)).is_err());
    }

    #[test]
    fn capacity_limit() {
        let mut bank = CaseBank::with_capacity_limit(1);
        bank.retain(Case::new("a", "s", "a", 1.0)).unwrap();
        assert!(matches!(bank.retain(Case::new("b", "s", "a", 1.0)), Err(MemoryError::Full(1))));
    }
}

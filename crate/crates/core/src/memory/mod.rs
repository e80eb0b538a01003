//! The four memory tiers: main memory, subtask and tool memory (one session
//! log), and the online-growing case bank.

mod case;
mod jsonl;
mod log;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use case::{Case, CaseBank};
pub use jsonl::{
    load_bank, load_bank_file, read_records, save_bank, save_bank_file, write_record, LoadOptions, LoadReport,
    PersistentBank,
};
pub use log::{append_log, LogEntry, SessionLog, Stamped, RETAIN_TOOL};

use crate::exam::{Exam, SpecificationMatrix};

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("case id `{0}` already present")]
    Conflict(String),
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("bank is full ({0} cases)")]
    Full(usize),
    #[error("unknown parent id `{0}`")]
    UnknownParent(String),
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("encode error: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Executor role that owns a case bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Generator,
    Solver,
    Tutor,
}

/// Case banks keyed by role. With `shared = true` every role reads and writes
/// one bank.
#[derive(Debug, Clone, Default)]
pub struct CaseMemory {
    shared: bool,
    banks: BTreeMap<AgentRole, CaseBank>,
}

impl CaseMemory {
    pub fn per_role() -> Self {
        CaseMemory { shared: false, banks: BTreeMap::new() }
    }

    pub fn shared() -> Self {
        CaseMemory { shared: true, banks: BTreeMap::new() }
    }

    fn key(&self, role: AgentRole) -> AgentRole {
        if self.shared { AgentRole::Generator } else { role }
    }

    pub fn bank(&self, role: AgentRole) -> Option<&CaseBank> {
        self.banks.get(&self.key(role))
    }

    pub fn bank_mut(&mut self, role: AgentRole) -> &mut CaseBank {
        let key = self.key(role);
        self.banks.entry(key).or_default()
    }
}

/// Long-lived core data: blueprint, past exams and student records.
#[derive(Debug, Clone)]
pub struct MainMemory {
    pub matrix: SpecificationMatrix,
    pub exam_bank: Vec<Exam>,
    pub students: BTreeMap<String, serde_json::Value>,
}

impl MainMemory {
    pub fn new(matrix: SpecificationMatrix) -> Self {
        MainMemory { matrix, exam_bank: Vec::new(), students: BTreeMap::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_vs_per_role() {
        let mut m = CaseMemory::shared();
        m.bank_mut(AgentRole::Generator).retain(Case::new("a", "s", "x", 1.0)).unwrap();
        assert_eq!(m.bank(AgentRole::Tutor).unwrap().len(), 1);

        let mut m = CaseMemory::per_role();
        m.bank_mut(AgentRole::Generator).retain(Case::new("a", "s", "x", 1.0)).unwrap();
        assert!(m.bank(AgentRole::Tutor).is_none());
    }
}

//! Request decomposition into ordered subtasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::memory::AgentRole;

pub const DEFAULT_RETRY_BUDGET: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    GenerateExam,
    SolveExam,
    TutorStudent,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::GenerateExam => "generate_exam",
            RequestKind::SolveExam => "solve_exam",
            RequestKind::TutorStudent => "tutor_student",
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequestKind {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generate_exam" => Ok(RequestKind::GenerateExam),
            "solve_exam" => Ok(RequestKind::SolveExam),
            "tutor_student" => Ok(RequestKind::TutorStudent),
            other => Err(AgentError::Dispatch(format!("unknown request kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskKind {
    Generate,
    Validate,
    Regenerate,
    Normalize,
    Solve,
    Grade,
    Analyze,
    Recommend,
    Simulate,
}

impl SubtaskKind {
    pub fn role(self) -> AgentRole {
        match self {
            SubtaskKind::Generate | SubtaskKind::Validate | SubtaskKind::Regenerate => AgentRole::Generator,
            SubtaskKind::Normalize | SubtaskKind::Solve | SubtaskKind::Grade => AgentRole::Solver,
            SubtaskKind::Analyze | SubtaskKind::Recommend | SubtaskKind::Simulate => AgentRole::Tutor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: usize,
    pub role: AgentRole,
    pub kind: SubtaskKind,
    pub input: String,
    pub status: SubtaskStatus,
}

impl Subtask {
    fn new(id: usize, kind: SubtaskKind, input: &str) -> Self {
        Subtask { id, role: kind.role(), kind, input: input.to_string(), status: SubtaskStatus::Pending }
    }

    /// Moves the status forward; any other transition is rejected.
    pub fn advance(&mut self, to: SubtaskStatus) -> Result<(), AgentError> {
        use SubtaskStatus::*;
        let ok = matches!((self.status, to), (Pending, Running) | (Running, Done) | (Running, Failed));
        if !ok {
            return Err(AgentError::Dispatch(format!("subtask {} cannot move from {:?} to {to:?}", self.id, self.status)));
        }
        self.status = to;
        Ok(())
    }
}

/// Ordered subtask list for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub kind: RequestKind,
    pub subtasks: Vec<Subtask>,
    pub retry_budget: u32,
}

impl Plan {
    pub fn regenerations(&self) -> u32 {
        self.subtasks.iter().filter(|s| s.kind == SubtaskKind::Regenerate).count() as u32
    }

    /// Appends a regenerate step followed by a fresh validate step. Fails once
    /// the retry budget is spent.
    pub fn push_regeneration(&mut self, input: &str) -> Result<(usize, usize), AgentError> {
        if self.kind != RequestKind::GenerateExam {
            return Err(AgentError::Dispatch(format!("{} requests have no regeneration step", self.kind)));
        }
        if self.regenerations() >= self.retry_budget {
            return Err(AgentError::Dispatch(format!("retry budget of {} regenerations spent", self.retry_budget)));
        }
        let regen = self.subtasks.len();
        self.subtasks.push(Subtask::new(regen, SubtaskKind::Regenerate, input));
        self.subtasks.push(Subtask::new(regen + 1, SubtaskKind::Validate, input));
        Ok((regen, regen + 1))
    }
}

/// Expands a request through the fixed dispatch table.
pub fn plan(kind: RequestKind, payload: &str, retry_budget: u32) -> Plan {
    let kinds: &[SubtaskKind] = match kind {
        RequestKind::GenerateExam => &[SubtaskKind::Generate, SubtaskKind::Validate],
        RequestKind::SolveExam => &[SubtaskKind::Normalize, SubtaskKind::Solve, SubtaskKind::Grade],
        RequestKind::TutorStudent => &[SubtaskKind::Analyze, SubtaskKind::Recommend, SubtaskKind::Simulate],
    };
    let subtasks = kinds.iter().enumerate().map(|(i, k)| Subtask::new(i, *k, payload)).collect();
    Plan { kind, subtasks, retry_budget }
}

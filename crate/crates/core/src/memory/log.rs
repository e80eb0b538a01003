//! Subtask and tool memory: an append-only, text-first session log.
//!
//! Requests, subtask status lines and tool interactions share one ordered log
//! so the interleaving between planner and executors is preserved. Timestamps
//! are a logical clock, which keeps logs reproducible.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::jsonl::{read_records, write_record, LoadOptions};
use super::{Case, CaseBank, MemoryError};

/// Tool name under which retained cases are logged; replay keys off it.
pub const RETAIN_TOOL: &str = "retain";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tier", rename_all = "snake_case")]
pub enum LogEntry {
    Request { request_id: String, payload: String },
    Subtask { subtask_id: String, request_id: String, payload: String, outcome: String },
    Tool { subtask_id: String, tool: String, payload: String, outcome: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped {
    pub timestamp: u64,
    #[serde(flatten)]
    pub entry: LogEntry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    entries: Vec<Stamped>,
    requests: HashSet<String>,
    subtasks: HashSet<String>,
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry after checking its parent reference.
    pub fn append(&mut self, entry: LogEntry) -> Result<&Stamped, MemoryError> {
        match &entry {
            LogEntry::Request { request_id, .. } => {
                self.requests.insert(request_id.clone());
            }
            LogEntry::Subtask { subtask_id, request_id, .. } => {
                if !self.requests.contains(request_id) {
                    return Err(MemoryError::UnknownParent(request_id.clone()));
                }
                self.subtasks.insert(subtask_id.clone());
            }
            LogEntry::Tool { subtask_id, .. } => {
                if !self.subtasks.contains(subtask_id) {
                    return Err(MemoryError::UnknownParent(subtask_id.clone()));
                }
            }
        }
        let timestamp = self.entries.len() as u64;
        self.entries.push(Stamped { timestamp, entry });
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn entries(&self) -> &[Stamped] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subtask_entries(&self) -> impl Iterator<Item = &Stamped> {
        self.entries.iter().filter(|e| matches!(e.entry, LogEntry::Subtask { .. }))
    }

    pub fn tool_entries(&self) -> impl Iterator<Item = &Stamped> {
        self.entries.iter().filter(|e| matches!(e.entry, LogEntry::Tool { .. }))
    }

    /// Logs a retained case as a tool interaction of `subtask_id`.
    pub fn log_retain(&mut self, subtask_id: &str, case: &Case) -> Result<(), MemoryError> {
        let payload = serde_json::to_string(case).map_err(|e| MemoryError::Encode(e.to_string()))?;
        self.append(LogEntry::Tool {
            subtask_id: subtask_id.to_string(),
            tool: RETAIN_TOOL.into(),
            payload,
            outcome: if case.success { "success".into() } else { "failure".into() },
        })?;
        Ok(())
    }

    /// Rebuilds the case bank from the retain entries of this log.
    pub fn replay_bank(&self) -> Result<CaseBank, MemoryError> {
        let mut cases = Vec::new();
        for e in &self.entries {
            if let LogEntry::Tool { tool, payload, .. } = &e.entry {
                if tool == RETAIN_TOOL {
                    let case: Case = serde_json::from_str(payload)
                        .map_err(|err| MemoryError::Malformed { line: e.timestamp as usize + 1, message: err.to_string() })?;
                    cases.push(case);
                }
            }
        }
        CaseBank::from_stored(cases)
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), MemoryError> {
        for e in &self.entries {
            write_record(&mut sink, e)?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Loads a log, re-validating parent references in order.
    pub fn load<R: Read>(source: R) -> Result<Self, MemoryError> {
        let (entries, _) = read_records::<Stamped, _>(source, LoadOptions::default())?;
        let mut log = SessionLog::new();
        for e in entries {
            log.append(e.entry)?;
        }
        Ok(log)
    }
}

/// Appends to `log`, returning its new length.
pub fn append_log(log: &mut SessionLog, entry: LogEntry) -> Result<usize, MemoryError> {
    log.append(entry)?;
    Ok(log.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(id: &str) -> LogEntry {
        LogEntry::Request { request_id: id.into(), payload: "p".into() }
    }

    fn subtask(id: &str, req: &str) -> LogEntry {
        LogEntry::Subtask { subtask_id: id.into(), request_id: req.into(), payload: String::new(), outcome: "pending".into() }
    }

    fn tool(sub: &str, name: &str) -> LogEntry {
        LogEntry::Tool { subtask_id: sub.into(), tool: name.into(), payload: String::new(), outcome: "ok".into() }
    }

    #[test]
    fn empty_plus_one() {
        let mut log = SessionLog::new();
        assert_eq!(append_log(&mut log, request("r1")).unwrap(), 1);
    }

    #[test]
    fn unknown_parent_is_reference_error() {
        let mut log = SessionLog::new();
        assert!(matches!(log.append(tool("nope", "x")), Err(MemoryError::UnknownParent(_))));
        assert!(matches!(log.append(subtask("s", "nope")), Err(MemoryError::UnknownParent(_))));
        assert!(log.is_empty());
    }

    #[test]
    fn interleaving_preserved() {
        let mut log = SessionLog::new();
        log.append(request("r")).unwrap();
        log.append(subtask("s1", "r")).unwrap();
        log.append(tool("s1", "a")).unwrap();
        log.append(subtask("s2", "r")).unwrap();
        log.append(tool("s1", "b")).unwrap();
        log.append(tool("s2", "c")).unwrap();
        let tools: Vec<_> = log
            .tool_entries()
            .map(|e| match &e.entry {
                LogEntry::Tool { tool, .. } => tool.as_str(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(tools, ["a", "b", "c"]);
        assert!(log.entries().windows(2).all(|w| w[0].timestamp < w[1].timestamp));

        let mut buf = Vec::new();
        log.save(&mut buf).unwrap();
        assert_eq!(SessionLog::load(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn replay_reproduces_bank() {
        let mut log = SessionLog::new();
        log.append(request("r")).unwrap();
        log.append(subtask("s", "r")).unwrap();
        let mut bank = CaseBank::new();
        for i in 0..5 {
            let c = bank.retain(Case::new(format!("c{i}"), "s", "a", (i % 2) as f64)).unwrap().clone();
            log.log_retain("s", &c).unwrap();
            log.append(tool("s", "other")).unwrap();
        }
        let mut buf = Vec::new();
        log.save(&mut buf).unwrap();
        let replayed = SessionLog::load(buf.as_slice()).unwrap().replay_bank().unwrap();
        assert_eq!(replayed, bank);
    }
}

use super::planner::{Plan, SubtaskStatus, DEFAULT_RETRY_BUDGET};
use super::{AgentError, ChatBackend, DecodeParams, Message};
use crate::memory::{Case, CaseBank, LogEntry, SessionLog};
use crate::retrieval::{Embedding, Retrieved, Retriever};

/// State owned by one pipeline run: backend, case bank, optional retrieval
/// components (`None` runs without memory) and the session log.
pub struct AgentSession {
    backend: Box<dyn ChatBackend>,
    pub bank: CaseBank,
    pub retriever: Option<Retriever>,
    pub log: SessionLog,
    pub retry_budget: u32,
    pub decode: DecodeParams,
    /// When false, retained cases get no dataset records and the learned
    /// values stay as seeded.
    pub write_back: bool,
    requests: u64,
}

impl std::fmt::Debug for AgentSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentSession")
            .field("backend", &self.backend.id())
            .field("bank", &self.bank.len())
            .field("retriever", &self.retriever)
            .field("log", &self.log.len())
            .finish_non_exhaustive()
    }
}

impl AgentSession {
    pub fn new(backend: Box<dyn ChatBackend>, bank: CaseBank, retriever: Option<Retriever>) -> Self {
        AgentSession {
            backend,
            bank,
            retriever,
            log: SessionLog::new(),
            retry_budget: DEFAULT_RETRY_BUDGET,
            decode: DecodeParams::default(),
            write_back: true,
            requests: 0,
        }
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    /// Swaps the backend, keeping bank, retriever and log.
    pub fn set_backend(&mut self, backend: Box<dyn ChatBackend>) {
        self.backend = backend;
    }

    /// Retrieval calls served so far; 0 without memory.
    pub fn retrieval_calls(&self) -> u64 {
        self.retriever.as_ref().map_or(0, Retriever::calls)
    }

    pub(crate) fn open_request(&mut self, plan: &Plan, payload: &str) -> Result<String, AgentError> {
        self.requests += 1;
        let request_id = format!("req-{}", self.requests);
        self.log.append(LogEntry::Request {
            request_id: request_id.clone(),
            payload: format!("{}: {payload}", plan.kind),
        })?;
        Ok(request_id)
    }

    pub(crate) fn subtask_id(request_id: &str, idx: usize) -> String {
        format!("{request_id}.{idx}")
    }

    /// Advances subtask `idx` and records the transition.
    pub(crate) fn set_status(
        &mut self,
        request_id: &str,
        plan: &mut Plan,
        idx: usize,
        status: SubtaskStatus,
    ) -> Result<String, AgentError> {
        let sub = &mut plan.subtasks[idx];
        sub.advance(status)?;
        let subtask_id = Self::subtask_id(request_id, idx);
        let outcome = serde_json::to_value(status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let kind = serde_json::to_value(sub.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        self.log.append(LogEntry::Subtask {
            subtask_id: subtask_id.clone(),
            request_id: request_id.to_string(),
            payload: kind,
            outcome,
        })?;
        Ok(subtask_id)
    }

    /// One backend call; prompt and raw completion go to tool memory.
    pub(crate) fn call_backend(&mut self, subtask_id: &str, system: &str, prompt: &str, seed: u64) -> Result<String, AgentError> {
        let result = self.backend.complete(system, &[Message::user(prompt)], &self.decode, seed);
        let outcome = match &result {
            Ok(text) => text.clone(),
            Err(e) => format!("error: {e}"),
        };
        self.log.append(LogEntry::Tool {
            subtask_id: subtask_id.to_string(),
            tool: format!("backend:{}", self.backend.id()),
            payload: prompt.to_string(),
            outcome,
        })?;
        result
    }

    pub(crate) fn retrieve(&mut self, state_text: &str) -> Result<Option<Retrieved>, AgentError> {
        match self.retriever.as_mut() {
            Some(r) => Ok(Some(r.retrieve(&self.bank, state_text)?)),
            None => Ok(None),
        }
    }

    /// Retains `case` and adds a `(query, reward)` record to every retrieved
    /// case and to the new case.
    pub(crate) fn retain(
        &mut self,
        subtask_id: &str,
        case: Case,
        query: Option<&Embedding>,
        retrieved: &[String],
    ) -> Result<String, AgentError> {
        let reward = case.reward;
        let stored = self.bank.retain(case)?.clone();
        self.log.log_retain(subtask_id, &stored)?;
        if let Some(r) = self.retriever.as_mut().filter(|_| self.write_back) {
            let emb = match query {
                Some(q) => q.clone(),
                None => r.embed(&stored.state_text),
            };
            for id in retrieved.iter().chain(std::iter::once(&stored.case_id)) {
                r.estimator_mut().add_record(&self.bank, id, emb.clone(), reward)?;
            }
        }
        Ok(stored.case_id)
    }
}

/// Retrieved cases ordered by weight, heaviest first, ties in retrieval order.
pub(crate) fn by_weight(retrieved: &Retrieved) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> =
        retrieved.cases.iter().zip(&retrieved.mu).map(|(c, w)| (c.case_id.clone(), *w)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

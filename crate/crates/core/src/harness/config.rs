use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{ChatBackend, HttpBackendConfig, MockBackend};
use crate::retrieval::{RetrievalConfig, RetrievalMode, Retriever};

/// Retrieval variant of a run; `None` runs without case memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    None,
    ReadNp,
    ReadP,
}

impl MemoryMode {
    pub const ALL: [MemoryMode; 3] = [MemoryMode::None, MemoryMode::ReadNp, MemoryMode::ReadP];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryMode::None => "none",
            MemoryMode::ReadNp => "readnp",
            MemoryMode::ReadP => "readp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MemoryMode::None => "w/o memory",
            MemoryMode::ReadNp => "+ReadNP",
            MemoryMode::ReadP => "+ReadP",
        }
    }
}

impl fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(MemoryMode::None),
            "readnp" => Ok(MemoryMode::ReadNp),
            "readp" => Ok(MemoryMode::ReadP),
            other => Err(HarnessError::Config(format!("unknown memory mode `{other}` (none|readnp|readp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl FromStr for BackendKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(HarnessError::Config(format!("unknown backend `{other}` (mock|http)"))),
        }
    }
}

/// Everything needed to rerun an experiment. Embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub memory: MemoryMode,
    pub k: usize,
    pub alpha: f64,
    pub k_pre: usize,
    pub profile: String,
    pub backend: BackendKind,
    /// Exams generated by the pipeline.
    pub exams: usize,
    /// Every n-th item is withheld from the mock's answer key (0 keeps all).
    pub withhold_every: usize,
    pub students: usize,
    pub matrix_path: Option<PathBuf>,
    pub bank_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Leaves wall-clock figures out of the written report.
    pub normalize_timestamps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = RetrievalConfig::default();
        RunConfig {
            seed: 7,
            memory: MemoryMode::ReadP,
            k: r.k,
            alpha: r.alpha,
            k_pre: r.k_pre,
            profile: "2025".into(),
            backend: BackendKind::Mock,
            exams: 10,
            withhold_every: 0,
            students: 20,
            matrix_path: None,
            bank_path: None,
            out_dir: None,
            normalize_timestamps: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn retrieval_config(&self) -> Option<RetrievalConfig> {
        let mode = match self.memory {
            MemoryMode::None => return None,
            MemoryMode::ReadNp => RetrievalMode::ReadNp,
            MemoryMode::ReadP => RetrievalMode::ReadP,
        };
        Some(RetrievalConfig { mode, k: self.k, alpha: self.alpha, k_pre: self.k_pre })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(r) = self.retrieval_config() {
            r.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.exams == 0 {
            return Err(HarnessError::Config("exams must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build_retriever(&self) -> Result<Option<Retriever>, HarnessError> {
        self.retrieval_config().map(Retriever::with_defaults).transpose().map_err(Into::into)
    }

    /// The configured backend; `mock` is used as is for the mock kind.
    pub fn build_backend(&self, mock: MockBackend) -> Result<Box<dyn ChatBackend>, HarnessError> {
        match self.backend {
            BackendKind::Mock => Ok(Box::new(mock)),
            BackendKind::Http => http_backend(),
        }
    }
}

#[cfg(feature = "http")]
fn http_backend() -> Result<Box<dyn ChatBackend>, HarnessError> {
    Ok(Box::new(crate::agents::HttpBackend::new(HttpBackendConfig::from_env()?)))
}

#[cfg(not(feature = "http"))]
fn http_backend() -> Result<Box<dyn ChatBackend>, HarnessError> {
    HttpBackendConfig::from_env()?;
    Err(crate::agents::AgentError::Backend("built without the `http` feature".into()).into())
}

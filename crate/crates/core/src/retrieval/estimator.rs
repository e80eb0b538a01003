//! Kernel episodic-control Q estimator.
//!
//! Each case `c` owns a dataset `D_c` of `(state embedding, Q')` records and
//! `Q_EC(s, c) = Σ k(s, s_i) Q'_i / Σ k(s, s_i)` over `D_c`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kernel::log_kernel;
use super::{Embedding, KernelParams, RetrievalError, TargetParams};
use crate::memory::CaseBank;

pub const CHECKPOINT_VERSION: u32 = 1;

/// How the TD target aggregates next-state Q values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backup {
    /// `α · log Σ exp(Q/α)`, the max-entropy soft value.
    #[default]
    Soft,
    /// `α · log Σ exp(Q)`, the target with the temperature only outside the sum.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub step_size: f64,
    /// Copy online parameters into the target every this many updates (0 = never).
    pub sync_every: u64,
    /// Value reported for a case whose dataset is empty.
    pub q0: f64,
    pub backup: Backup,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { alpha: 1.0, gamma: 0.9, step_size: 0.05, sync_every: 50, q0: 0.0, backup: Backup::Soft }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(RetrievalError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(RetrievalError::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(RetrievalError::Config(format!("step size must be non-negative, got {}", self.step_size)));
        }
        if !self.q0.is_finite() {
            return Err(RetrievalError::Config("q0 must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub state: Embedding,
    pub q: f64,
}

/// Result of a Q lookup; `cold` marks the empty-dataset prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub value: f64,
    pub cold: bool,
}

/// Which parameter set to evaluate the kernel with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Params {
    Online,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEstimator {
    pub(crate) params: KernelParams,
    pub(crate) target: TargetParams,
    pub(crate) config: EstimatorConfig,
    pub(crate) datasets: BTreeMap<String, Vec<Record>>,
    pub(crate) updates: u64,
    pub(crate) syncs: u64,
}

impl QEstimator {
    pub fn new(params: KernelParams, config: EstimatorConfig) -> Result<Self, RetrievalError> {
        params.check()?;
        config.validate()?;
        Ok(QEstimator {
            target: params.clone(),
            params,
            config,
            datasets: BTreeMap::new(),
            updates: 0,
            syncs: 0,
        })
    }

    /// Isotropic kernel with unit scales and the given length scale.
    pub fn with_dim(dim: usize, length_scale: f64, config: EstimatorConfig) -> Result<Self, RetrievalError> {
        QEstimator::new(KernelParams::isotropic(dim, length_scale), config)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn target(&self) -> &TargetParams {
        &self.target
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EstimatorConfig) -> Result<(), RetrievalError> {
        config.validate()?;
        self.config = config;
        Ok(())
    }

    /// Replaces the online parameters; the target is left alone.
    pub fn set_params(&mut self, params: KernelParams) -> Result<(), RetrievalError> {
        params.check()?;
        if params.dim() != self.params.dim() {
            return Err(RetrievalError::Shape("parameter dimension changed".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn dataset(&self, case_id: &str) -> &[Record] {
        self.datasets.get(case_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn datasets(&self) -> &BTreeMap<String, Vec<Record>> {
        &self.datasets
    }

    /// Appends a record to `D_c`; the case must exist in `bank`.
    pub fn add_record(&mut self, bank: &CaseBank, case_id: &str, state: Embedding, q: f64) -> Result<(), RetrievalError> {
        if !bank.contains(case_id) {
            return Err(RetrievalError::UnknownCase(case_id.to_string()));
        }
        if state.dim() != self.params.dim() {
            return Err(RetrievalError::Shape(format!(
                "record dimension {} differs from kernel dimension {}",
                state.dim(),
                self.params.dim()
            )));
        }
        if !q.is_finite() {
            return Err(RetrievalError::Domain("record Q value must be finite".into()));
        }
        self.datasets.entry(case_id.to_string()).or_default().push(Record { state, q });
        Ok(())
    }

    /// Checks every dataset key against `bank`.
    pub fn check_against(&self, bank: &CaseBank) -> Result<(), RetrievalError> {
        match self.datasets.keys().find(|k| !bank.contains(k)) {
            Some(k) => Err(RetrievalError::UnknownCase(k.clone())),
            None => Ok(()),
        }
    }

    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
        self.syncs += 1;
    }

    pub(crate) fn kernel(&self, which: Params) -> &KernelParams {
        match which {
            Params::Online => &self.params,
            Params::Target => &self.target,
        }
    }

    /// Normalized kernel weights of `D_c` records for `state`.
    pub(crate) fn weights(&self, kernel: &KernelParams, records: &[Record], state: &Embedding) -> Result<Vec<f64>, RetrievalError> {
        let logs = records
            .iter()
            .map(|r| log_kernel(kernel, state, &r.state))
            .collect::<Result<Vec<_>, _>>()?;
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|w| w / z).collect())
    }

    pub fn q_ec_with(&self, state: &Embedding, case_id: &str, which: Params) -> Result<QValue, RetrievalError> {
        let records = self.dataset(case_id);
        if records.is_empty() {
            return Ok(QValue { value: self.config.q0, cold: true });
        }
        let w = self.weights(self.kernel(which), records, state)?;
        let value = w.iter().zip(records).map(|(w, r)| w * r.q).sum();
        Ok(QValue { value, cold: false })
    }

    /// `Q_EC(s, c; θ)` with the online parameters.
    pub fn q_ec(&self, state: &Embedding, case_id: &str) -> Result<QValue, RetrievalError> {
        self.q_ec_with(state, case_id, Params::Online)
    }

    pub fn to_checkpoint(&self) -> String {
        let cp = Checkpoint { version: CHECKPOINT_VERSION, estimator: self.clone() };
        let mut s = serde_json::to_string(&cp).expect("estimator serializes");
        s.push('\n');
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, RetrievalError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| RetrievalError::Checkpoint(e.to_string()))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(RetrievalError::Checkpoint(format!(
                "checkpoint version {} but this build reads version {CHECKPOINT_VERSION}",
                header.version
            )));
        }
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| RetrievalError::Checkpoint(e.to_string()))?;
        let est = cp.estimator;
        est.params.check()?;
        est.target.check()?;
        est.config.validate()?;
        Ok(est)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    #[serde(flatten)]
    estimator: QEstimator,
}

/// `Q_EC` for each case id, in order.
pub fn q_values(est: &QEstimator, state: &Embedding, case_ids: &[&str], which: Params) -> Result<Vec<f64>, RetrievalError> {
    case_ids.iter().map(|id| est.q_ec_with(state, id, which).map(|q| q.value)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::Case;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn bank(ids: &[&str]) -> CaseBank {
        let mut b = CaseBank::new();
        for id in ids {
            b.retain(Case::new(*id, "s", "a", 0.0)).unwrap();
        }
        b
    }

    #[test]
    fn single_record_returns_its_value() {
        let b = bank(&["c"]);
        let mut est = QEstimator::with_dim(2, 1.0, EstimatorConfig::default()).unwrap();
        est.add_record(&b, "c", emb(&[0.3, 0.1]), 0.7).unwrap();
        for q in [[0.0, 0.0], [5.0, -3.0], [0.3, 0.1]] {
            assert!((est.q_ec(&emb(&q), "c").unwrap().value - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn equidistant_records_average() {
        let b = bank(&["c"]);
        let mut est = QEstimator::with_dim(2, 1.0, EstimatorConfig::default()).unwrap();
        est.add_record(&b, "c", emb(&[1.0, 0.0]), 0.0).unwrap();
        est.add_record(&b, "c", emb(&[-1.0, 0.0]), 1.0).unwrap();
        assert!((est.q_ec(&emb(&[0.0, 0.0]), "c").unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cold_start_uses_prior() {
        let cfg = EstimatorConfig { q0: 0.25, ..Default::default() };
        let est = QEstimator::with_dim(2, 1.0, cfg).unwrap();
        let q = est.q_ec(&emb(&[0.0, 0.0]), "missing").unwrap();
        assert!(q.cold);
        assert_eq!(q.value, 0.25);
    }

    #[test]
    fn far_records_do_not_underflow() {
        let b = bank(&["c"]);
        let mut est = QEstimator::with_dim(1, 1e-3, EstimatorConfig::default()).unwrap();
        est.add_record(&b, "c", emb(&[10.0]), 2.0).unwrap();
        est.add_record(&b, "c", emb(&[11.0]), 4.0).unwrap();
        let q = est.q_ec(&emb(&[0.0]), "c").unwrap().value;
        assert!((q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_case_rejected() {
        let b = bank(&["c"]);
        let mut est = QEstimator::with_dim(1, 1.0, EstimatorConfig::default()).unwrap();
        assert!(matches!(est.add_record(&b, "x", emb(&[0.0]), 1.0), Err(RetrievalError::UnknownCase(_))));
    }

    #[test]
    fn config_validation() {
        let bad = [
            EstimatorConfig { alpha: 0.0, ..Default::default() },
            EstimatorConfig { gamma: 1.0, ..Default::default() },
            EstimatorConfig { step_size: -0.1, ..Default::default() },
        ];
        for cfg in bad {
            assert!(QEstimator::with_dim(1, 1.0, cfg).is_err());
        }
    }

    #[test]
    fn checkpoint_round_trip_and_version_check() {
        let b = bank(&["c"]);
        let mut est = QEstimator::with_dim(2, 0.5, EstimatorConfig::default()).unwrap();
        est.add_record(&b, "c", emb(&[0.25, 0.5]), 0.125).unwrap();
        let text = est.to_checkpoint();
        assert_eq!(QEstimator::from_checkpoint(&text).unwrap(), est);
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(QEstimator::from_checkpoint(&bumped), Err(RetrievalError::Checkpoint(_))));
    }
}

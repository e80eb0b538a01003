//! TD and cross-entropy training of the kernel parameters.

use super::estimator::Params;
use super::kernel::accumulate_log_kernel_grad;
use super::policy::log_sum_exp;
use super::{Backup, Embedding, KernelParams, QEstimator, RetrievalError, PARAM_FLOOR};

/// Clamp applied to predicted success probabilities before taking logs.
pub const CE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct NextState {
    pub state: Embedding,
    pub candidates: Vec<String>,
}

/// `(s, c, r, s′, C(s′))`; `next = None` marks a terminal transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TdTransition {
    pub state: Embedding,
    pub case_id: String,
    pub reward: f64,
    pub next: Option<NextState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeSample {
    pub state: Embedding,
    pub case_id: String,
    pub success: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Td(&'a [TdTransition]),
    Ce(&'a [CeSample]),
}

/// Partial derivatives of a batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradient {
    pub diag_scale: Vec<f64>,
    pub length_scale: f64,
}

impl KernelGradient {
    fn zeros(dim: usize) -> Self {
        KernelGradient { diag_scale: vec![0.0; dim], length_scale: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        (self.diag_scale.iter().map(|g| g * g).sum::<f64>() + self.length_scale * self.length_scale).sqrt()
    }

    fn scale(&mut self, s: f64) {
        self.diag_scale.iter_mut().for_each(|g| *g *= s);
        self.length_scale *= s;
    }
}

/// `Q_EC` under `kernel`, adding `outer · ∇Q` into `grad` when given.
fn q_and_grad(
    est: &QEstimator,
    kernel: &KernelParams,
    state: &Embedding,
    case_id: &str,
    grad: Option<(&mut KernelGradient, f64)>,
) -> Result<f64, RetrievalError> {
    let records = est.dataset(case_id);
    if records.is_empty() {
        return Ok(est.config.q0);
    }
    let w = est.weights(kernel, records, state)?;
    let q: f64 = w.iter().zip(records).map(|(w, r)| w * r.q).sum();
    if let Some((g, outer)) = grad {
        for (p, r) in w.iter().zip(records) {
            let scale = outer * p * (r.q - q);
            if scale != 0.0 {
                accumulate_log_kernel_grad(kernel, state, &r.state, scale, &mut g.diag_scale, &mut g.length_scale);
            }
        }
    }
    Ok(q)
}

/// Bootstrapped TD target, always evaluated with the frozen parameters.
pub fn td_target(est: &QEstimator, t: &TdTransition) -> Result<f64, RetrievalError> {
    let Some(next) = t.next.as_ref().filter(|n| !n.candidates.is_empty()) else {
        return Ok(t.reward);
    };
    let alpha = est.config.alpha;
    let q = next
        .candidates
        .iter()
        .map(|c| est.q_ec_with(&next.state, c, Params::Target).map(|v| v.value))
        .collect::<Result<Vec<_>, _>>()?;
    let backup = match est.config.backup {
        Backup::Soft => alpha * log_sum_exp(&q.iter().map(|v| v / alpha).collect::<Vec<_>>()),
        Backup::Literal => alpha * log_sum_exp(&q),
    };
    Ok(t.reward + est.config.gamma * backup)
}

fn td_eval(est: &QEstimator, kernel: &KernelParams, batch: &[TdTransition], mut grad: Option<&mut KernelGradient>) -> Result<f64, RetrievalError> {
    if batch.is_empty() {
        return Err(RetrievalError::Domain("empty TD batch".into()));
    }
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for t in batch {
        let y = td_target(est, t)?;
        let q = q_and_grad(est, kernel, &t.state, &t.case_id, None)?;
        let err = q - y;
        if let Some(g) = grad.as_deref_mut() {
            q_and_grad(est, kernel, &t.state, &t.case_id, Some((g, 2.0 * err / n)))?;
        }
        loss += err * err;
    }
    Ok(loss / n)
}

fn check_success(s: &CeSample) -> Result<(), RetrievalError> {
    if s.success == 0.0 || s.success == 1.0 {
        Ok(())
    } else {
        Err(RetrievalError::Domain(format!("success label must be 0 or 1, got {}", s.success)))
    }
}

fn ce_eval(est: &QEstimator, kernel: &KernelParams, batch: &[CeSample], mut grad: Option<&mut KernelGradient>) -> Result<f64, RetrievalError> {
    if batch.is_empty() {
        return Err(RetrievalError::Domain("empty cross-entropy batch".into()));
    }
    batch.iter().try_for_each(check_success)?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let raw = q_and_grad(est, kernel, &s.state, &s.case_id, None)?;
        let q = raw.clamp(CE_EPSILON, 1.0 - CE_EPSILON);
        let r = s.success;
        loss += -r * q.ln() - (1.0 - r) * (1.0 - q).ln();
        if let Some(g) = grad.as_deref_mut() {
            if q == raw {
                let dl_dq = -r / q + (1.0 - r) / (1.0 - q);
                q_and_grad(est, kernel, &s.state, &s.case_id, Some((g, dl_dq / n)))?;
            }
        }
    }
    Ok(loss / n)
}

/// Mean squared TD error with `params` as the online kernel.
pub fn td_loss(est: &QEstimator, batch: &[TdTransition], params: &KernelParams) -> Result<f64, RetrievalError> {
    td_eval(est, params, batch, None)
}

/// Mean binary cross-entropy with `params` as the online kernel.
pub fn ce_loss(est: &QEstimator, batch: &[CeSample], params: &KernelParams) -> Result<f64, RetrievalError> {
    ce_eval(est, params, batch, None)
}

/// Loss and its analytic gradient at the estimator's online parameters.
pub fn kernel_gradient(est: &QEstimator, objective: Objective<'_>) -> Result<(f64, KernelGradient), RetrievalError> {
    let mut g = KernelGradient::zeros(est.params.dim());
    let loss = match objective {
        Objective::Td(batch) => td_eval(est, &est.params, batch, Some(&mut g))?,
        Objective::Ce(batch) => ce_eval(est, &est.params, batch, Some(&mut g))?,
    };
    Ok((loss, g))
}

fn apply(est: &mut QEstimator, mut g: KernelGradient) {
    g.scale(est.config.step_size);
    let p = &mut est.params;
    for (w, d) in p.diag_scale.iter_mut().zip(&g.diag_scale) {
        *w = (*w - d).max(PARAM_FLOOR);
    }
    p.length_scale = (p.length_scale - g.length_scale).max(PARAM_FLOOR);
    est.updates += 1;
    let every = est.config.sync_every;
    if every > 0 && est.updates.is_multiple_of(every) {
        est.sync_target();
    }
}

/// One gradient step on the TD loss; returns the loss before the step.
pub fn td_update(est: &mut QEstimator, batch: &[TdTransition]) -> Result<f64, RetrievalError> {
    let (loss, g) = kernel_gradient(est, Objective::Td(batch))?;
    apply(est, g);
    Ok(loss)
}

/// One gradient step on the cross-entropy loss; returns the loss before the step.
pub fn ce_update(est: &mut QEstimator, batch: &[CeSample]) -> Result<f64, RetrievalError> {
    let (loss, g) = kernel_gradient(est, Objective::Ce(batch))?;
    apply(est, g);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{Case, CaseBank};
    use crate::retrieval::EstimatorConfig;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn setup(records: &[(&[f64], f64)], config: EstimatorConfig) -> QEstimator {
        let mut bank = CaseBank::new();
        bank.retain(Case::new("c", "s", "a", 1.0)).unwrap();
        let dim = records[0].0.len();
        let mut est = QEstimator::with_dim(dim, 0.8, config).unwrap();
        for (s, q) in records {
            est.add_record(&bank, "c", emb(s), *q).unwrap();
        }
        est
    }

    #[test]
    fn terminal_fixed_point_has_zero_loss_and_gradient() {
        let mut est = setup(&[(&[0.0, 1.0], 0.4)], EstimatorConfig::default());
        let before = est.params().clone();
        let t = TdTransition { state: emb(&[1.0, 0.0]), case_id: "c".into(), reward: 0.4, next: None };
        assert_eq!(td_update(&mut est, &[t]).unwrap(), 0.0);
        assert_eq!(est.params(), &before);
    }

    #[test]
    fn constant_dataset_gives_zero_gradient() {
        let est = setup(&[(&[0.0, 1.0], 0.3), (&[1.0, 0.5], 0.3), (&[0.2, 0.2], 0.3)], EstimatorConfig::default());
        let t = TdTransition { state: emb(&[0.5, 0.5]), case_id: "c".into(), reward: 1.0, next: None };
        let (loss, g) = kernel_gradient(&est, Objective::Td(&[t])).unwrap();
        assert!(loss > 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn ce_half_is_ln2() {
        let est = setup(&[(&[0.0], 0.5)], EstimatorConfig::default());
        let s = CeSample { state: emb(&[0.3]), case_id: "c".into(), success: 1.0 };
        let l = ce_loss(&est, &[s], est.params()).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn ce_rejects_soft_labels() {
        let est = setup(&[(&[0.0], 0.5)], EstimatorConfig::default());
        let s = CeSample { state: emb(&[0.3]), case_id: "c".into(), success: 0.5 };
        assert!(matches!(ce_loss(&est, &[s], est.params()), Err(RetrievalError::Domain(_))));
    }

    #[test]
    fn zero_step_changes_nothing() {
        let cfg = EstimatorConfig { step_size: 0.0, ..Default::default() };
        let mut est = setup(&[(&[0.0, 1.0], 0.0), (&[1.0, 0.0], 1.0)], cfg);
        let before = est.params().clone();
        let t = TdTransition { state: emb(&[0.9, 0.1]), case_id: "c".into(), reward: 0.0, next: None };
        td_update(&mut est, &[t]).unwrap();
        assert_eq!(est.params(), &before);
    }

    #[test]
    fn target_frozen_between_syncs_and_counter_matches() {
        let cfg = EstimatorConfig { sync_every: 7, step_size: 0.5, ..Default::default() };
        let mut est = setup(&[(&[0.0, 1.0], 0.0), (&[1.0, 0.0], 1.0)], cfg);
        let t = TdTransition { state: emb(&[0.7, 0.3]), case_id: "c".into(), reward: 0.0, next: None };
        let frozen = est.target().clone();
        for _ in 0..6 {
            td_update(&mut est, std::slice::from_ref(&t)).unwrap();
        }
        assert_eq!(est.target(), &frozen);
        for _ in 6..30 {
            td_update(&mut est, std::slice::from_ref(&t)).unwrap();
        }
        assert_eq!(est.syncs(), 30 / 7);
    }

    #[test]
    fn after_sync_target_equals_online() {
        let mut est = setup(&[(&[0.0, 1.0], 0.2), (&[1.0, 0.0], 0.9)], EstimatorConfig::default());
        est.set_params(KernelParams::new(vec![2.0, 0.5], 0.3).unwrap()).unwrap();
        est.sync_target();
        let s = emb(&[0.4, 0.6]);
        assert_eq!(
            est.q_ec_with(&s, "c", Params::Target).unwrap(),
            est.q_ec_with(&s, "c", Params::Online).unwrap()
        );
    }

    #[test]
    fn soft_and_literal_backups_differ_only_by_inner_temperature() {
        let mut bank = CaseBank::new();
        bank.retain(Case::new("a", "s", "x", 0.0)).unwrap();
        bank.retain(Case::new("b", "s", "x", 0.0)).unwrap();
        let cfg = EstimatorConfig { alpha: 0.5, gamma: 0.9, ..Default::default() };
        let mut est = QEstimator::with_dim(1, 1.0, cfg.clone()).unwrap();
        est.add_record(&bank, "a", emb(&[0.0]), 1.0).unwrap();
        est.add_record(&bank, "b", emb(&[0.0]), 2.0).unwrap();
        let t = TdTransition {
            state: emb(&[0.0]),
            case_id: "a".into(),
            reward: 0.1,
            next: Some(NextState { state: emb(&[0.0]), candidates: vec!["a".into(), "b".into()] }),
        };
        let soft = td_target(&est, &t).unwrap();
        let expected_soft = 0.1 + 0.9 * 0.5 * ((1.0f64 / 0.5).exp() + (2.0f64 / 0.5).exp()).ln();
        assert!((soft - expected_soft).abs() < 1e-12);
        est.set_config(EstimatorConfig { backup: Backup::Literal, ..cfg }).unwrap();
        let literal = td_target(&est, &t).unwrap();
        let expected_literal = 0.1 + 0.9 * 0.5 * (1.0f64.exp() + 2.0f64.exp()).ln();
        assert!((literal - expected_literal).abs() < 1e-12);
    }
}

use serde::{Deserialize, Serialize};

use super::{Embedding, RetrievalError};

/// Smallest value a kernel parameter may take after a gradient step.
pub const PARAM_FLOOR: f64 = 1e-6;

/// Anisotropic RBF kernel parameters:
/// `k(a, b) = exp(-‖W (a - b)‖² / (2ℓ²))` with `W = diag(diag_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub diag_scale: Vec<f64>,
    pub length_scale: f64,
}

impl KernelParams {
    pub fn new(diag_scale: Vec<f64>, length_scale: f64) -> Result<Self, RetrievalError> {
        let p = KernelParams { diag_scale, length_scale };
        p.check()?;
        Ok(p)
    }

    pub fn isotropic(dim: usize, length_scale: f64) -> Self {
        KernelParams { diag_scale: vec![1.0; dim], length_scale }
    }

    pub fn dim(&self) -> usize {
        self.diag_scale.len()
    }

    pub fn check(&self) -> Result<(), RetrievalError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.length_scale) || !self.diag_scale.iter().all(|&w| ok(w)) {
            return Err(RetrievalError::Config("kernel parameters must be finite and positive".into()));
        }
        Ok(())
    }

    /// Number of scalar parameters (diagonal plus length scale).
    pub fn len(&self) -> usize {
        self.diag_scale.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Frozen copy of [`KernelParams`] used for bootstrapped targets.
pub type TargetParams = KernelParams;

fn check_dims(params: &KernelParams, a: &Embedding, b: &Embedding) -> Result<(), RetrievalError> {
    if a.dim() != b.dim() || a.dim() != params.dim() {
        return Err(RetrievalError::Shape(format!(
            "kernel dimension {} with embeddings of dimension {} and {}",
            params.dim(),
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `ln k(a, b)`; kept in log space so weight normalization cannot underflow.
pub fn log_kernel(params: &KernelParams, a: &Embedding, b: &Embedding) -> Result<f64, RetrievalError> {
    check_dims(params, a, b)?;
    let sq: f64 = params
        .diag_scale
        .iter()
        .zip(a.values().iter().zip(b.values()))
        .map(|(w, (x, y))| {
            let d = w * (x - y);
            d * d
        })
        .sum();
    Ok(-sq / (2.0 * params.length_scale * params.length_scale))
}

pub fn kernel_value(params: &KernelParams, a: &Embedding, b: &Embedding) -> Result<f64, RetrievalError> {
    log_kernel(params, a, b).map(f64::exp)
}

/// Adds `scale · ∇_θ ln k(a, b)` into `(grad_diag, grad_len)`.
pub(crate) fn accumulate_log_kernel_grad(
    params: &KernelParams,
    a: &Embedding,
    b: &Embedding,
    scale: f64,
    grad_diag: &mut [f64],
    grad_len: &mut f64,
) {
    let l2 = params.length_scale * params.length_scale;
    let mut sq = 0.0;
    for (d, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        let delta2 = (x - y) * (x - y);
        if delta2 == 0.0 {
            continue;
        }
        let w = params.diag_scale[d];
        grad_diag[d] += scale * (-w * delta2 / l2);
        sq += w * w * delta2;
    }
    // ∂/∂ℓ of -sq/(2ℓ²) is sq/ℓ³.
    *grad_len += scale * sq / (l2 * params.length_scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_distance_is_one() {
        let p = KernelParams::isotropic(3, 0.7);
        assert_eq!(kernel_value(&p, &e(&[0.1, 0.2, 0.3]), &e(&[0.1, 0.2, 0.3])).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        let p = KernelParams::isotropic(2, 1.0);
        assert!(matches!(kernel_value(&p, &e(&[1.0]), &e(&[1.0])), Err(RetrievalError::Shape(_))));
    }

    #[test]
    fn rejects_non_positive() {
        assert!(KernelParams::new(vec![1.0, 0.0], 1.0).is_err());
        assert!(KernelParams::new(vec![1.0], -1.0).is_err());
    }
}

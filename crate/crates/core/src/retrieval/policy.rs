//! Max-entropy retrieval distribution and its entropy.

use super::RetrievalError;

/// `log Σ exp(x_i)` with max subtraction. `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `μ(c) = exp(Q_c/α) / Σ exp(Q_c'/α)`, stabilized by subtracting the max.
pub fn softmax(q_values: &[f64], alpha: f64) -> Result<Vec<f64>, RetrievalError> {
    if q_values.is_empty() {
        return Err(RetrievalError::Domain("softmax over an empty candidate set".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(RetrievalError::Config(format!("temperature must be positive, got {alpha}")));
    }
    if q_values.iter().any(|q| !q.is_finite()) {
        return Err(RetrievalError::Domain("non-finite Q value".into()));
    }
    let m = q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q_values.iter().map(|q| ((q - m) / alpha).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> Result<f64, RetrievalError> {
    if probs.iter().any(|&p| p.is_nan() || p < 0.0 || !p.is_finite()) {
        return Err(RetrievalError::Domain("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(RetrievalError::Domain(format!("probabilities sum to {total}, not 1")));
    }
    Ok(-probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_value_softmax() {
        // 1/(1+e) and e/(1+e)
        let p = softmax(&[1.0, 2.0], 1.0).unwrap();
        assert!((p[0] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((p[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn uniform_and_one_hot_entropy() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(entropy(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn large_q_values_do_not_overflow() {
        let p = softmax(&[1000.0, 1001.0], 1.0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn bad_temperature() {
        assert!(softmax(&[1.0], 0.0).is_err());
        assert!(softmax(&[], 1.0).is_err());
    }
}

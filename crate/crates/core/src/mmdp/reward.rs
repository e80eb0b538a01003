use serde::{Deserialize, Serialize};

use super::MmdpError;

/// Weights of the three reward components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeRewardConfig {
    pub quantitative: f64,
    pub qualitative: f64,
    pub binary: f64,
}

impl Default for CompositeRewardConfig {
    fn default() -> Self {
        CompositeRewardConfig { quantitative: 1.0, qualitative: 1.0, binary: 1.0 }
    }
}

impl CompositeRewardConfig {
    pub fn validate(&self) -> Result<f64, MmdpError> {
        let w = [self.quantitative, self.qualitative, self.binary];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MmdpError::Config("reward weights must be finite and non-negative".into()));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(MmdpError::Config("reward weights sum to zero".into()));
        }
        Ok(total)
    }
}

/// Weighted mean of the components.
pub fn composite_reward(quantitative: f64, qualitative: f64, binary: f64, config: &CompositeRewardConfig) -> Result<f64, MmdpError> {
    let total = config.validate()?;
    Ok((config.quantitative * quantitative + config.qualitative * qualitative + config.binary * binary) / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_and_convexity() {
        let only_q = CompositeRewardConfig { quantitative: 1.0, qualitative: 0.0, binary: 0.0 };
        assert_eq!(composite_reward(0.37, 0.9, 1.0, &only_q).unwrap(), 0.37);
        assert_eq!(composite_reward(1.0, 1.0, 1.0, &CompositeRewardConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn weighted_table() {
        let cfg = CompositeRewardConfig { quantitative: 2.0, qualitative: 1.0, binary: 1.0 };
        // (2·0.5 + 0.8 + 0) / 4
        assert!((composite_reward(0.5, 0.8, 0.0, &cfg).unwrap() - 0.45).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_rejected() {
        let cfg = CompositeRewardConfig { quantitative: 0.0, qualitative: 0.0, binary: 0.0 };
        assert!(composite_reward(1.0, 1.0, 1.0, &cfg).is_err());
    }
}

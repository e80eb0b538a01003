use serde::{Deserialize, Serialize};

use super::RetrievalError;

pub const DEFAULT_DIM: usize = 256;

/// Fixed-length vector with a cached Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding {
    values: Vec<f64>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::Domain("embedding has non-finite entries".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Embedding { values, norm })
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding { values: vec![0.0; dim], norm: 0.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Cosine similarity; zero if either vector is zero.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        self.dot(other) / (self.norm * other.norm)
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = RetrievalError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

/// Maps text to a fixed-dimension embedding. Implementations must be
/// deterministic.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Embedding;
}

/// Hashes character trigrams into `dim` buckets and L2-normalizes.
/// Empty text maps to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct TrigramEmbedder {
    dim: usize,
}

impl TrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        TrigramEmbedder { dim }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder::new(DEFAULT_DIM)
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for TrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Embedding {
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return Embedding::zeros(self.dim);
        }
        let mut v = vec![0.0; self.dim];
        let width = chars.len().min(3);
        for gram in chars.windows(width) {
            let gram: String = gram.iter().collect();
            let h = fnv1a(gram.bytes());
            v[(h % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        Embedding::new(v).expect("finite by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        let e = TrigramEmbedder::default().embed("");
        assert_eq!(e.dim(), DEFAULT_DIM);
        assert!(e.values().iter().all(|&v| v == 0.0));
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn deterministic_and_unit_norm(t in "\\PC{0,40}") {
            let emb = TrigramEmbedder::default();
            let a = emb.embed(&t);
            prop_assert_eq!(&a, &emb.embed(&t));
            if !t.is_empty() {
                let norm = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() <= 1e-9);
            }
        }
    }
}

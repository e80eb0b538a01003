//! Word n-gram overlap between item stems. Lower overlap means a more novel item.

use std::collections::HashMap;

use super::{ExamError, ExamItem};

pub const DEFAULT_NGRAM: usize = 3;

/// Multiset of word n-grams after lowercasing and whitespace splitting.
/// A text shorter than `n` tokens contributes its whole token run as one gram.
pub fn ngram_counts(text: &str, n: usize) -> HashMap<Vec<String>, usize> {
    let lower = text.to_lowercase();
    let tokens: Vec<String> = lower.split_whitespace().map(str::to_string).collect();
    let mut counts = HashMap::new();
    if tokens.is_empty() {
        return counts;
    }
    if tokens.len() < n {
        counts.insert(tokens, 1);
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Multiset Jaccard: Σ min / Σ max over the union of grams.
pub fn multiset_jaccard(a: &HashMap<Vec<String>, usize>, b: &HashMap<Vec<String>, usize>) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (g, &ca) in a {
        let cb = b.get(g).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    for (g, &cb) in b {
        if !a.contains_key(g) {
            union += cb;
        }
    }
    if union == 0 { 0.0 } else { inter as f64 / union as f64 }
}

/// Largest stem overlap (percent) between `item` and any bank item.
pub fn novelty_overlap(item: &ExamItem, bank: &[ExamItem], n: usize) -> Result<f64, ExamError> {
    stem_overlap(&item.stem, bank.iter().map(|b| b.stem.as_str()), n)
}

pub fn stem_overlap<'a>(stem: &str, bank: impl IntoIterator<Item = &'a str>, n: usize) -> Result<f64, ExamError> {
    if n == 0 {
        return Err(ExamError::InvalidArgument("n-gram size must be at least 1".into()));
    }
    if stem.trim().is_empty() {
        return Err(ExamError::InvalidArgument("cannot score novelty of an empty stem".into()));
    }
    let grams = ngram_counts(stem, n);
    let best = bank
        .into_iter()
        .map(|other| multiset_jaccard(&grams, &ngram_counts(other, n)))
        .fold(0.0, f64::max);
    Ok(100.0 * best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_full_overlap() {
        let s = "Find the maximum value of the function on the interval";
        assert_eq!(stem_overlap(s, [s], 3).unwrap(), 100.0);
        assert_eq!(stem_overlap(s, [s.to_uppercase().as_str()], 3).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(stem_overlap("alpha beta gamma delta", ["one two three four"], 3).unwrap(), 0.0);
        assert_eq!(stem_overlap("alpha beta gamma", std::iter::empty(), 3).unwrap(), 0.0);
    }

    #[test]
    fn short_texts() {
        assert_eq!(stem_overlap("a b", ["a b"], 3).unwrap(), 100.0);
        assert_eq!(stem_overlap("a b", ["a b c"], 3).unwrap(), 0.0);
        assert!(stem_overlap("  ", ["x"], 3).is_err());
        assert!(stem_overlap("x", ["x"], 0).is_err());
    }

    #[test]
    fn multiset_counts_repeats() {
        // grams of "x x x x" with n=1: {x:4}; of "x x": {x:2}; jaccard = 2/4
        assert!((stem_overlap("x x x x", ["x x"], 1).unwrap() - 50.0).abs() < 1e-12);
    }
}

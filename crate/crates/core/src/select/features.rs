use std::collections::BTreeMap;

use crate::hashing::hash_str;

pub const FEATURE_BITS: u32 = 20;
pub const FEATURE_DIM: usize = 1 << FEATURE_BITS;

/// Sparse L2-normalized term counts over `FEATURE_DIM` hashed buckets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    /// Strictly increasing.
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, weights: &[f32]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| f64::from(weights[i as usize]) * v)
            .sum()
    }
}

fn bucket(key: &str, seed: u64) -> u32 {
    (hash_str(key, seed) & (FEATURE_DIM as u64 - 1)) as u32
}

pub fn featurize(text: &str) -> FeatureVector {
    featurize_with_seed(text, 0)
}

/// Lowercased word unigrams and bigrams, hashed with `seed`.
pub fn featurize_with_seed(text: &str, seed: u64) -> FeatureVector {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for w in &words {
        *counts.entry(bucket(&format!("u\u{1f}{w}"), seed)).or_default() += 1.0;
    }
    for pair in words.windows(2) {
        *counts
            .entry(bucket(&format!("b\u{1f}{}\u{1f}{}", pair[0], pair[1]), seed))
            .or_default() += 1.0;
    }
    let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    let (indices, values) = counts
        .into_iter()
        .map(|(i, c)| (i, c / norm))
        .unzip();
    FeatureVector { indices, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unigrams_and_bigram() {
        let f = featurize("a b");
        assert_eq!(f.indices.len(), 3);
        assert!((f.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_sorted() {
        let t = "The cat sat on the mat with another cat";
        let (a, b) = (featurize(t), featurize(t));
        assert_eq!(a, b);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(a.indices.iter().all(|&i| (i as usize) < FEATURE_DIM));
    }

    #[test]
    fn counts_accumulate_before_normalizing() {
        let f = featurize("a a");
        let ua = bucket("u\u{1f}a", 0);
        let pos = f.indices.iter().position(|&i| i == ua).unwrap();
        // counts (a:2, a_a:1) normalized by sqrt(5)
        assert!((f.values[pos] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((f.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        assert!(featurize("").is_empty());
        assert!(featurize("  \n ").is_empty());
    }

    #[test]
    fn seed_changes_buckets() {
        assert_ne!(featurize_with_seed("alpha beta", 1).indices, featurize_with_seed("alpha beta", 2).indices);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{hash_str, mix64};

const SHINGLE_SEED: u64 = 0x5348_494e_474c_4531;

/// Distinct hashed word n-grams of a document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShingleSet {
    /// Sorted, unique.
    pub hashes: Vec<u64>,
}

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn from_hashes(mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        ShingleSet { hashes }
    }
}

/// Lowercased, whitespace-split word `n`-grams. Texts with fewer than `n`
/// words give an empty set.
pub fn shingle(text: &str, n: usize) -> ShingleSet {
    assert!(n >= 1, "shingle size must be >= 1");
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.len() < n {
        return ShingleSet::default();
    }
    let hashes = words
        .windows(n)
        .map(|w| hash_str(&w.join("\u{1f}"), SHINGLE_SEED))
        .collect();
    ShingleSet::from_hashes(hashes)
}

/// Exact Jaccard similarity of two shingle sets; two empty sets score 0.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.hashes.len() && j < b.hashes.len() {
        match a.hashes[i].cmp(&b.hashes[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.hashes.len() + b.hashes.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub seed: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `k` hash functions `h_i(x) = mix64(x ^ salt_i)` with salts derived from
/// `(seed, i)`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    salts: Vec<u64>,
}

impl MinHasher {
    pub fn new(k: usize, seed: u64) -> Self {
        assert!(k >= 1, "signature length must be >= 1");
        let salts = (0..k as u64).map(|i| mix64(seed ^ mix64(i.wrapping_add(1)))).collect();
        MinHasher { seed, salts }
    }

    pub fn len(&self) -> usize {
        self.salts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.salts.is_empty()
    }

    /// Empty sets map to the all-`u64::MAX` sentinel.
    pub fn signature(&self, set: &ShingleSet) -> MinHashSignature {
        let mut values = vec![u64::MAX; self.salts.len()];
        for &x in &set.hashes {
            for (v, &salt) in values.iter_mut().zip(&self.salts) {
                let h = mix64(x ^ salt);
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature {
            seed: self.seed,
            values,
        }
    }
}

pub fn minhash_signature(set: &ShingleSet, k: usize, seed: u64) -> MinHashSignature {
    MinHasher::new(k, seed).signature(set)
}

/// Fraction of agreeing slots.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("signature lengths {} vs {}", a.len(), b.len())));
    }
    if a.seed != b.seed {
        return Err(Error::Dimension(format!("signature seeds {} vs {}", a.seed, b.seed)));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let agree = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shingle_counts() {
        assert_eq!(shingle("a b c d e f", 5).len(), 2);
        assert!(shingle("a b c", 5).is_empty());
        assert_eq!(shingle("x y z w v", 5), shingle("x y z w v", 5));
        assert_eq!(shingle("A B C D E", 5), shingle("a  b\tc d\ne", 5));
        assert_eq!(shingle("a a a a a a a", 5).len(), 1);
    }

    #[test]
    fn identical_sets_estimate_one() {
        let s = shingle("the quick brown fox jumps over the lazy dog again", 5);
        let sig = minhash_signature(&s, 112, 7);
        assert_eq!(sig.len(), 112);
        assert_eq!(estimate_jaccard(&sig, &sig).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_singletons_estimate_zero() {
        let a = minhash_signature(&ShingleSet::from_hashes(vec![1]), 112, 7);
        let b = minhash_signature(&ShingleSet::from_hashes(vec![2]), 112, 7);
        assert_eq!(estimate_jaccard(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_errors() {
        let s = ShingleSet::from_hashes(vec![1, 2, 3]);
        let a = minhash_signature(&s, 112, 1);
        assert!(estimate_jaccard(&a, &minhash_signature(&s, 64, 1)).is_err());
        assert!(estimate_jaccard(&a, &minhash_signature(&s, 112, 2)).is_err());
    }

    #[test]
    fn empty_set_sentinel() {
        let sig = minhash_signature(&ShingleSet::default(), 112, 3);
        assert!(sig.values.iter().all(|v| *v == u64::MAX));
    }

    #[test]
    fn exact_jaccard_by_set_arithmetic() {
        let a = ShingleSet::from_hashes((0..10).collect());
        let b = ShingleSet::from_hashes((5..15).collect());
        assert!((exact_jaccard(&a, &b) - 5.0 / 15.0).abs() < 1e-12);
    }
}

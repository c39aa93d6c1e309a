use std::collections::{BTreeSet, HashMap};

use super::MinHashSignature;
use crate::error::{Error, Result};

/// Banded LSH tables: `bands` tables keyed by a hash of `rows` consecutive
/// signature slots. Entries are positions into the caller's signature list.
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    tables: Vec<HashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize) -> Self {
        LshIndex {
            bands,
            rows,
            tables: vec![HashMap::new(); bands],
        }
    }

    fn check(&self, sig: &MinHashSignature) -> Result<()> {
        if self.bands * self.rows != sig.len() || self.bands == 0 {
            return Err(Error::Dimension(format!(
                "{} bands x {} rows does not match signature length {}",
                self.bands,
                self.rows,
                sig.len()
            )));
        }
        Ok(())
    }

    fn band_key(&self, sig: &MinHashSignature, band: usize) -> u64 {
        let slots = &sig.values[band * self.rows..(band + 1) * self.rows];
        let mut bytes = Vec::with_capacity(slots.len() * 8);
        for v in slots {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        xxhash_rust::xxh3::xxh3_64_with_seed(&bytes, band as u64)
    }

    pub fn insert(&mut self, pos: usize, sig: &MinHashSignature) -> Result<()> {
        self.check(sig)?;
        for band in 0..self.bands {
            let key = self.band_key(sig, band);
            self.tables[band].entry(key).or_default().push(pos);
        }
        Ok(())
    }

    /// Concatenates bucket lists of an index built over another partition.
    pub fn merge(&mut self, other: LshIndex) -> Result<()> {
        if (self.bands, self.rows) != (other.bands, other.rows) {
            return Err(Error::Dimension("merging indexes of different shapes".into()));
        }
        for (mine, theirs) in self.tables.iter_mut().zip(other.tables) {
            for (k, v) in theirs {
                mine.entry(k).or_default().extend(v);
            }
        }
        Ok(())
    }

    /// Pairs `(i, j)`, `i < j`, that agree on every slot of some band.
    /// Bucket-key collisions are filtered by direct slot comparison.
    pub fn candidates(&self, sigs: &[&MinHashSignature]) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (band, table) in self.tables.iter().enumerate() {
            let range = band * self.rows..(band + 1) * self.rows;
            for bucket in table.values() {
                for (x, &a) in bucket.iter().enumerate() {
                    for &b in &bucket[x + 1..] {
                        if a == b {
                            continue;
                        }
                        let pair = (a.min(b), a.max(b));
                        if out.contains(&pair) {
                            continue;
                        }
                        if sigs[a].values[range.clone()] == sigs[b].values[range.clone()] {
                            out.insert(pair);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Candidate pairs of ids (ordered lexicographically within each pair).
pub fn lsh_candidates(sigs: &[(String, MinHashSignature)], bands: usize, rows: usize) -> Result<BTreeSet<(String, String)>> {
    let mut index = LshIndex::new(bands, rows);
    for (i, (_, sig)) in sigs.iter().enumerate() {
        index.insert(i, sig)?;
    }
    let refs: Vec<&MinHashSignature> = sigs.iter().map(|(_, s)| s).collect();
    Ok(index
        .candidates(&refs)
        .into_iter()
        .map(|(a, b)| {
            let (x, y) = (&sigs[a].0, &sigs[b].0);
            if x <= y {
                (x.clone(), y.clone())
            } else {
                (y.clone(), x.clone())
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::{minhash_signature, ShingleSet};

    fn sig(items: std::ops::Range<u64>) -> MinHashSignature {
        minhash_signature(&ShingleSet::from_hashes(items.collect()), 112, 11)
    }

    #[test]
    fn identical_signatures_collide() {
        let sigs = vec![("a".to_string(), sig(0..50)), ("b".to_string(), sig(0..50))];
        let c = lsh_candidates(&sigs, 14, 8).unwrap();
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn disjoint_sets_do_not_collide() {
        let sigs = vec![("a".to_string(), sig(0..50)), ("b".to_string(), sig(1000..1050))];
        assert!(lsh_candidates(&sigs, 14, 8).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let sigs = vec![("a".to_string(), sig(0..5))];
        assert!(matches!(lsh_candidates(&sigs, 10, 10), Err(Error::Dimension(_))));
    }

    #[test]
    fn partitioned_merge_matches_single_index() {
        let sigs: Vec<MinHashSignature> = (0..40).map(|i| sig((i / 4) * 100..(i / 4) * 100 + 30 + i % 4)).collect();
        let refs: Vec<&MinHashSignature> = sigs.iter().collect();
        let mut whole = LshIndex::new(14, 8);
        for (i, s) in sigs.iter().enumerate() {
            whole.insert(i, s).unwrap();
        }
        let mut left = LshIndex::new(14, 8);
        let mut right = LshIndex::new(14, 8);
        for (i, s) in sigs.iter().enumerate() {
            if i % 2 == 0 { left.insert(i, s).unwrap() } else { right.insert(i, s).unwrap() }
        }
        left.merge(right).unwrap();
        assert_eq!(left.candidates(&refs), whole.candidates(&refs));
        assert!(!whole.candidates(&refs).is_empty());
    }
}

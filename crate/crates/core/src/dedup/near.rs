use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_jaccard, exact_jaccard, shingle, LshIndex, MinHashSignature, MinHasher, ShingleSet};
use crate::corpus::Record;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    PerSnapshot,
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Scope::Global),
            "per-snapshot" | "per_snapshot" => Ok(Scope::PerSnapshot),
            other => Err(Error::Config(format!("unknown dedup scope {other:?}"))),
        }
    }
}

/// How LSH candidates are confirmed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Estimated,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NearDedupConfig {
    pub scope: Scope,
    pub threshold: f64,
    pub ngram: usize,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
    pub verification: Verification,
}

impl Default for NearDedupConfig {
    fn default() -> Self {
        NearDedupConfig {
            scope: Scope::PerSnapshot,
            threshold: super::DEFAULT_THRESHOLD,
            ngram: super::DEFAULT_NGRAM,
            num_perm: super::DEFAULT_NUM_PERM,
            bands: super::DEFAULT_BANDS,
            rows: super::DEFAULT_ROWS,
            seed: 0,
            verification: Verification::Estimated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DupLink {
    pub dup: String,
    pub kept: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub input: u64,
    pub kept: u64,
    pub removed: u64,
    pub candidate_pairs: u64,
    pub verified_pairs: u64,
    /// Components with more than one member.
    pub clusters: u64,
    /// Records with fewer words than the shingle size; never grouped.
    pub unshingled: u64,
    pub partitions: u64,
}

#[derive(Debug, Default)]
pub struct NearDedupOutput {
    pub kept: Vec<Record>,
    /// Sorted by the dropped record's stream position.
    pub dup_map: Vec<DupLink>,
    pub report: DedupReport,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Roots are always the smaller position, so each component's root is
    /// its earliest member.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Near-duplicate removal over `records` in stream order.
pub fn dedup_near(records: Vec<Record>, cfg: &NearDedupConfig) -> Result<NearDedupOutput> {
    if cfg.bands * cfg.rows != cfg.num_perm {
        return Err(Error::Dimension(format!(
            "{} bands x {} rows != {} hash functions",
            cfg.bands, cfg.rows, cfg.num_perm
        )));
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(Error::Config(format!("threshold {} outside [0,1]", cfg.threshold)));
    }
    if cfg.scope == Scope::PerSnapshot {
        if let Some(r) = records.iter().find(|r| r.source.snapshot.is_empty()) {
            return Err(Error::MissingSnapshot(r.id.clone()));
        }
    }

    let hasher = MinHasher::new(cfg.num_perm, cfg.seed);
    let prepared: Vec<(ShingleSet, MinHashSignature)> = records
        .par_iter()
        .map(|r| {
            let s = shingle(&r.text, cfg.ngram);
            let sig = hasher.signature(&s);
            (s, sig)
        })
        .collect();

    let mut partitions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if prepared[i].0.is_empty() {
            continue;
        }
        let key = match cfg.scope {
            Scope::Global => "",
            Scope::PerSnapshot => r.source.snapshot.as_str(),
        };
        partitions.entry(key).or_default().push(i);
    }

    let sigs: Vec<&MinHashSignature> = prepared.iter().map(|(_, s)| s).collect();
    let mut report = DedupReport {
        input: records.len() as u64,
        unshingled: prepared.iter().filter(|(s, _)| s.is_empty()).count() as u64,
        partitions: partitions.len() as u64,
        ..Default::default()
    };
    let mut uf = UnionFind::new(records.len());
    for members in partitions.values() {
        let mut index = LshIndex::new(cfg.bands, cfg.rows);
        for &i in members {
            index.insert(i, sigs[i])?;
        }
        let candidates: Vec<(usize, usize)> = index.candidates(&sigs).into_iter().collect();
        report.candidate_pairs += candidates.len() as u64;
        let verified: Vec<(usize, usize)> = candidates
            .par_iter()
            .filter_map(|&(a, b)| {
                let sim = match cfg.verification {
                    Verification::Estimated => estimate_jaccard(sigs[a], sigs[b]).expect("same hasher"),
                    Verification::Exact => exact_jaccard(&prepared[a].0, &prepared[b].0),
                };
                (sim >= cfg.threshold).then_some((a, b))
            })
            .collect();
        report.verified_pairs += verified.len() as u64;
        for (a, b) in verified {
            uf.union(a, b);
        }
    }

    let roots: Vec<usize> = (0..records.len()).map(|i| uf.find(i)).collect();
    let mut cluster_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &roots {
        *cluster_sizes.entry(r).or_default() += 1;
    }
    report.clusters = cluster_sizes.values().filter(|&&n| n > 1).count() as u64;

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let mut out = NearDedupOutput::default();
    for (i, rec) in records.into_iter().enumerate() {
        if roots[i] == i {
            out.kept.push(rec);
        } else {
            out.dup_map.push(DupLink {
                dup: rec.id,
                kept: ids[roots[i]].clone(),
            });
        }
    }
    report.kept = out.kept.len() as u64;
    report.removed = out.dup_map.len() as u64;
    out.report = report;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, Domain, SourceMeta};
    use proptest::prelude::*;

    fn words(seed: u64, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{}", crate::hashing::mix64(seed * 100_003 + i as u64) % 50_000)).collect()
    }

    fn rec(text: &str, url: &str, snap: &str) -> Record {
        new_record(text, SourceMeta::new(url, snap, Domain::WebEn))
    }

    #[test]
    fn one_word_edit_in_500_is_a_duplicate() {
        let w = words(1, 500);
        let mut w2 = w.clone();
        w2[250] = "changed".into();
        for scope in [Scope::Global, Scope::PerSnapshot] {
            let recs = vec![rec(&w.join(" "), "a", "S1"), rec(&w2.join(" "), "b", "S1")];
            let cfg = NearDedupConfig { scope, ..Default::default() };
            let out = dedup_near(recs.clone(), &cfg).unwrap();
            assert_eq!(out.kept.len(), 1);
            assert_eq!(out.kept[0].id, recs[0].id);
            assert_eq!(out.dup_map, vec![DupLink { dup: recs[1].id.clone(), kept: recs[0].id.clone() }]);
        }
    }

    #[test]
    fn snapshots_are_independent_under_per_snapshot_scope() {
        let t = words(2, 200).join(" ");
        let recs = vec![rec(&t, "a", "S1"), rec(&t, "a", "S2")];
        let per = dedup_near(recs.clone(), &NearDedupConfig { scope: Scope::PerSnapshot, ..Default::default() }).unwrap();
        assert_eq!(per.kept.len(), 2);
        let global = dedup_near(recs, &NearDedupConfig { scope: Scope::Global, ..Default::default() }).unwrap();
        assert_eq!(global.kept.len(), 1);
    }

    #[test]
    fn missing_snapshot_errors_under_per_snapshot() {
        let recs = vec![rec("a b c d e f", "a", "")];
        assert!(matches!(
            dedup_near(recs.clone(), &NearDedupConfig::default()),
            Err(Error::MissingSnapshot(_))
        ));
        assert!(dedup_near(recs, &NearDedupConfig { scope: Scope::Global, ..Default::default() }).is_ok());
    }

    #[test]
    fn short_docs_are_never_grouped() {
        let recs = vec![rec("a b", "1", "S"), rec("c d", "2", "S")];
        let out = dedup_near(recs, &NearDedupConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 2);
        assert_eq!(out.report.unshingled, 2);
    }

    #[test]
    fn bad_dimensions() {
        let cfg = NearDedupConfig { bands: 10, ..Default::default() };
        assert!(matches!(dedup_near(vec![], &cfg), Err(Error::Dimension(_))));
    }

    fn corpus(groups: &[usize]) -> Vec<Record> {
        let mut out = Vec::new();
        for (g, &copies) in groups.iter().enumerate() {
            let base = words(g as u64 + 10, 80);
            for c in 0..copies {
                let snap = if g % 2 == 0 { "S1" } else { "S2" };
                out.push(rec(&base.join(" "), &format!("g{g}c{c}"), snap));
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn invariants(groups in prop::collection::vec(1usize..4, 1..8), perm_seed in any::<u64>(), global in any::<bool>()) {
            let scope = if global { Scope::Global } else { Scope::PerSnapshot };
            let cfg = NearDedupConfig { scope, ..Default::default() };
            let recs = corpus(&groups);
            let out = dedup_near(recs.clone(), &cfg).unwrap();
            prop_assert_eq!(out.kept.len(), groups.len());

            // permutation changes representatives only
            let mut shuffled = recs.clone();
            let mut s = perm_seed;
            for i in (1..shuffled.len()).rev() {
                s = crate::hashing::mix64(s);
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let out2 = dedup_near(shuffled, &cfg).unwrap();
            prop_assert_eq!(out2.kept.len(), out.kept.len());

            // fixed point
            let again = dedup_near(out.kept.clone(), &cfg).unwrap();
            prop_assert_eq!(again.kept.len(), out.kept.len());
            prop_assert!(again.dup_map.is_empty());

            // snapshot isolation
            let snap: BTreeMap<&str, &str> = recs.iter().map(|r| (r.id.as_str(), r.source.snapshot.as_str())).collect();
            if scope == Scope::PerSnapshot {
                for l in &out.dup_map {
                    prop_assert_eq!(snap[l.dup.as_str()], snap[l.kept.as_str()]);
                }
            }
        }
    }
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Pool, Schedule};
use crate::error::{Error, Result};
use crate::hashing::{hash_str, mix64};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterializedStage {
    pub stage_index: usize,
    pub ids: Vec<String>,
    pub allocated_tokens: u64,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Materialized {
    pub stages: Vec<MaterializedStage>,
}

/// Draws records without replacement. Each pool is shuffled once with a
/// generator seeded from `(rng_seed, pool_id)` and consumed in stage order;
/// an allocation takes records until its token count is reached.
pub fn materialize(schedule: &Schedule, pools: &[Pool], rng_seed: u64) -> Result<Materialized> {
    let mut demand: BTreeMap<&str, Vec<(usize, u64)>> = BTreeMap::new();
    for (si, st) in schedule.stages.iter().enumerate() {
        for a in &st.allocations {
            demand.entry(a.pool.as_str()).or_default().push((si, a.tokens));
        }
    }
    let by_id: BTreeMap<&str, &Pool> = pools.iter().map(|p| (p.stats.pool_id.as_str(), p)).collect();
    let jobs: Vec<(&str, Vec<(usize, u64)>)> = demand.into_iter().collect();
    type Drawn = Vec<(usize, Vec<(String, u64)>)>;
    let drawn: Vec<Result<Drawn>> = jobs
        .par_iter()
        .map(|(pool_id, wants)| {
            let pool = by_id.get(pool_id).ok_or_else(|| Error::Config(format!("schedule names unknown pool {pool_id}")))?;
            let mut items = pool.items.clone();
            let seed = mix64(rng_seed ^ hash_str(pool_id, 0x9001));
            items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut it = items.into_iter();
            let mut out = Vec::new();
            for &(si, want) in wants {
                let mut got = 0u64;
                let mut taken = Vec::new();
                while got < want {
                    let item = it.next().ok_or_else(|| Error::PoolExhausted(pool_id.to_string()))?;
                    got += item.tokens;
                    taken.push((item.id, item.tokens));
                }
                out.push((si, taken));
            }
            Ok(out)
        })
        .collect();

    let mut stages: Vec<MaterializedStage> = schedule
        .stages
        .iter()
        .map(|s| MaterializedStage {
            stage_index: s.stage_index,
            ids: Vec::new(),
            allocated_tokens: s.stage_tokens,
            tokens: 0,
        })
        .collect();
    for res in drawn {
        for (si, taken) in res? {
            for (id, t) in taken {
                stages[si].ids.push(id);
                stages[si].tokens += t;
            }
        }
    }
    Ok(Materialized { stages })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::corpus::{new_record, promote, Domain, OpContext, Record, SourceMeta, TierLabel};
    use std::collections::HashSet;

    fn records() -> Vec<Record> {
        let mut out = Vec::new();
        for (di, d) in [Domain::WebEn, Domain::Math].into_iter().enumerate() {
            for t in [TierLabel::L1, TierLabel::L2, TierLabel::L3] {
                for i in 0..20 {
                    let words = 1 + (i * 7 + di) % 9;
                    let text = vec!["w"; words].join(" ");
                    let l0 = new_record(&text, SourceMeta::new(format!("{d}{t}{i}"), "s", d));
                    out.push(promote(&l0, t, OpContext::fixed(0).stamp("x", "y"), text, &[]).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn deterministic_without_replacement() {
        let pools = build_pools(&records(), TokenEstimator::Whitespace, "");
        let stats: Vec<PoolStats> = pools.iter().map(|p| p.stats.clone()).collect();
        let mix = parse_mix("web_en=0.5,math=0.5").unwrap();
        let s = build_tiered_schedule(&stats, 150, &mix, 3).unwrap();
        let a = materialize(&s, &pools, 9).unwrap();
        assert_eq!(a, materialize(&s, &pools, 9).unwrap());
        assert_ne!(a, materialize(&s, &pools, 10).unwrap());
        let all: Vec<&String> = a.stages.iter().flat_map(|s| &s.ids).collect();
        assert_eq!(all.len(), all.iter().collect::<HashSet<_>>().len());
        for (m, st) in a.stages.iter().zip(&s.stages) {
            // each allocation overshoots by less than one record (at most 9 tokens)
            let n_alloc = st.allocations.len() as u64;
            assert!(m.tokens >= st.stage_tokens && m.tokens < st.stage_tokens + 9 * n_alloc);
        }
    }

    #[test]
    fn full_allocation_takes_everything() {
        let pools = build_pools(&records(), TokenEstimator::Whitespace, "");
        let p = &pools[0];
        let s = Schedule {
            strategy: Strategy::Mix,
            estimator: TokenEstimator::Whitespace,
            domain_mix: Default::default(),
            stages: vec![StageManifest::new(
                0,
                vec![Allocation {
                    pool: p.stats.pool_id.clone(),
                    tokens: p.stats.available_tokens,
                }],
            )],
            total_tokens: p.stats.available_tokens,
            verification_fraction: None,
            verification_pools: vec![],
        };
        let m = materialize(&s, &pools, 0).unwrap();
        assert_eq!(m.stages[0].ids.len(), p.items.len());
        let mut over = s.clone();
        over.stages[0].allocations[0].tokens += 1;
        assert!(matches!(materialize(&over, &pools, 0), Err(crate::Error::PoolExhausted(_))));
    }
}

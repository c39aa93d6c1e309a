use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PoolStats, Schedule, Strategy};
use crate::corpus::{Domain, TierLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    StageTotal { stage: usize, declared: u64, actual: u64 },
    Total { declared: u64, actual: u64 },
    UnknownPool { stage: usize, pool: String },
    Overdraw { pool: String, allocated: u64, available: u64 },
    DomainFraction { stage: usize, domain: Domain, target: f64, actual: f64 },
    TierOrder { stage: usize, tier: TierLabel, previous: TierLabel },
    VerificationShare { expected: u64, actual: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StageTotal { stage, declared, actual } => write!(f, "stage {stage}: stage_tokens {declared} but allocations sum to {actual}"),
            Violation::Total { declared, actual } => write!(f, "total_tokens {declared} but stages sum to {actual}"),
            Violation::UnknownPool { stage, pool } => write!(f, "stage {stage}: unknown pool {pool}"),
            Violation::Overdraw { pool, allocated, available } => write!(f, "pool {pool}: {allocated} tokens allocated, {available} available"),
            Violation::DomainFraction { stage, domain, target, actual } => write!(f, "stage {stage}: {domain} fraction {actual:.6} vs target {target:.6}"),
            Violation::TierOrder { stage, tier, previous } => write!(f, "stage {stage}: draws {tier} after a stage drawing {previous}"),
            Violation::VerificationShare { expected, actual } => write!(f, "verification tokens {actual}, expected {expected}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks token conservation, pool availability (summed over all stages),
/// per-stage domain fractions for mix and tiered schedules, tier order
/// across tiered stages and the verification share of decay mixes.
///
/// A domain fraction passes when it is within 1e-6 of target or when the
/// token difference is below one token, the unavoidable integer rounding.
pub fn validate_manifest(schedule: &Schedule, pools: &[PoolStats]) -> ValidationReport {
    let by_id: BTreeMap<&str, &PoolStats> = pools.iter().map(|p| (p.pool_id.as_str(), p)).collect();
    let mut v = Vec::new();
    let mut drawn: BTreeMap<&str, u64> = BTreeMap::new();
    let mut stage_sum_total = 0u64;
    let mut prev_max: Option<TierLabel> = None;

    for st in &schedule.stages {
        let actual: u64 = st.allocations.iter().map(|a| a.tokens).sum();
        if actual != st.stage_tokens {
            v.push(Violation::StageTotal {
                stage: st.stage_index,
                declared: st.stage_tokens,
                actual,
            });
        }
        stage_sum_total += st.stage_tokens;
        let mut per_domain: BTreeMap<Domain, u64> = BTreeMap::new();
        let (mut lo, mut hi): (Option<TierLabel>, Option<TierLabel>) = (None, None);
        for a in &st.allocations {
            *drawn.entry(a.pool.as_str()).or_default() += a.tokens;
            match by_id.get(a.pool.as_str()) {
                None => v.push(Violation::UnknownPool {
                    stage: st.stage_index,
                    pool: a.pool.clone(),
                }),
                Some(p) => {
                    *per_domain.entry(p.domain).or_default() += a.tokens;
                    if a.tokens > 0 {
                        lo = Some(lo.map_or(p.tier, |t| t.min(p.tier)));
                        hi = Some(hi.map_or(p.tier, |t| t.max(p.tier)));
                    }
                }
            }
        }
        if matches!(schedule.strategy, Strategy::Mix | Strategy::Tiered) && st.stage_tokens > 0 {
            let total = st.stage_tokens as f64;
            let domains: std::collections::BTreeSet<Domain> = schedule.domain_mix.keys().chain(per_domain.keys()).copied().collect();
            for d in domains {
                let target = schedule.domain_mix.get(&d).copied().unwrap_or(0.0);
                let got = per_domain.get(&d).copied().unwrap_or(0) as f64;
                let frac = got / total;
                if (frac - target).abs() > 1e-6 && (got - target * total).abs() >= 1.0 {
                    v.push(Violation::DomainFraction {
                        stage: st.stage_index,
                        domain: d,
                        target,
                        actual: frac,
                    });
                }
            }
        }
        if schedule.strategy == Strategy::Tiered {
            if let (Some(prev), Some(lo)) = (prev_max, lo) {
                if lo < prev {
                    v.push(Violation::TierOrder {
                        stage: st.stage_index,
                        tier: lo,
                        previous: prev,
                    });
                }
            }
            if hi.is_some() {
                prev_max = hi.max(prev_max);
            }
        }
    }
    if stage_sum_total != schedule.total_tokens {
        v.push(Violation::Total {
            declared: schedule.total_tokens,
            actual: stage_sum_total,
        });
    }
    for (pool, &allocated) in &drawn {
        if let Some(p) = by_id.get(pool) {
            if allocated > p.available_tokens {
                v.push(Violation::Overdraw {
                    pool: pool.to_string(),
                    allocated,
                    available: p.available_tokens,
                });
            }
        }
    }
    if let (Strategy::DecayMix, Some(f)) = (schedule.strategy, schedule.verification_fraction) {
        let expected = ((schedule.total_tokens as f64) * f).round() as u64;
        let actual: u64 = schedule
            .stages
            .iter()
            .flat_map(|s| &s.allocations)
            .filter(|a| schedule.verification_pools.contains(&a.pool))
            .map(|a| a.tokens)
            .sum();
        if actual != expected {
            v.push(Violation::VerificationShare { expected, actual });
        }
    }
    ValidationReport { violations: v }
}

use std::collections::{BTreeMap, BTreeSet};

use super::{apportion, Allocation, PoolStats, Schedule, Shortfall, StageManifest, Strategy, TokenEstimator};
use crate::corpus::{Domain, TierLabel};
use crate::error::{Error, Result};

pub const DEFAULT_VERIFICATION_FRACTION: f64 = 0.30;
const MIX_TIERS: [TierLabel; 3] = [TierLabel::L1, TierLabel::L2, TierLabel::L3];

/// Parses `web_en=0.5,web_zh=0.25,...`.
pub fn parse_mix(s: &str) -> Result<BTreeMap<Domain, f64>> {
    let mut mix = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (d, f) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("mix entry {part:?} is not domain=fraction")))?;
        let f: f64 = f.trim().parse().map_err(|_| Error::Config(format!("bad fraction in {part:?}")))?;
        if mix.insert(d.parse::<Domain>()?, f).is_some() {
            return Err(Error::Config(format!("domain {d} listed twice")));
        }
    }
    check_mix(&mix)?;
    Ok(mix)
}

fn check_mix(mix: &BTreeMap<Domain, f64>) -> Result<()> {
    if mix.values().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Config("domain fractions must lie in [0,1]".into()));
    }
    let sum: f64 = mix.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("domain fractions sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Integer per-domain budgets summing exactly to `budget`.
fn domain_quotas(budget: u64, mix: &BTreeMap<Domain, f64>) -> Vec<(Domain, u64)> {
    let weights: Vec<u64> = mix.values().map(|f| (f * 1e12).round() as u64).collect();
    mix.keys().copied().zip(apportion(budget, &weights)).collect()
}

fn pools_of(pools: &[PoolStats], d: Domain, t: TierLabel) -> Vec<&PoolStats> {
    pools.iter().filter(|p| p.domain == d && p.tier == t).collect()
}

fn spread(tokens: u64, pools: &[&PoolStats]) -> Vec<Allocation> {
    let avail: Vec<u64> = pools.iter().map(|p| p.available_tokens).collect();
    pools
        .iter()
        .zip(apportion(tokens, &avail))
        .map(|(p, t)| Allocation {
            pool: p.pool_id.clone(),
            tokens: t,
        })
        .collect()
}

fn check_unique(pools: &[&PoolStats]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in pools {
        if !seen.insert(&p.pool_id) {
            return Err(Error::Config(format!("duplicate pool id {}", p.pool_id)));
        }
    }
    Ok(())
}

fn schedule(strategy: Strategy, mix: BTreeMap<Domain, f64>, stages: Vec<StageManifest>) -> Schedule {
    Schedule {
        strategy,
        estimator: TokenEstimator::default(),
        domain_mix: mix,
        total_tokens: stages.iter().map(|s| s.stage_tokens).sum(),
        stages,
        verification_fraction: None,
        verification_pools: Vec::new(),
    }
}

impl Schedule {
    pub fn with_estimator(mut self, est: TokenEstimator) -> Self {
        self.estimator = est;
        self
    }
}

/// One stage. Each domain's share splits equally over L1, L2 and L3 with
/// the integer remainder going to L3. A tier short of its share hands the
/// rest to the other tiers, highest first.
pub fn build_mix_schedule(pools: &[PoolStats], budget: u64, domain_mix: &BTreeMap<Domain, f64>) -> Result<Schedule> {
    check_mix(domain_mix)?;
    check_unique(&pools.iter().collect::<Vec<_>>())?;
    let mut allocations = Vec::new();
    let mut short = Vec::new();
    for (d, quota) in domain_quotas(budget, domain_mix) {
        let tier_pools: Vec<Vec<&PoolStats>> = MIX_TIERS.iter().map(|&t| pools_of(pools, d, t)).collect();
        let avail: Vec<u64> = tier_pools.iter().map(|ps| ps.iter().map(|p| p.available_tokens).sum()).collect();
        let base = quota / 3;
        let share = [base, base, base + quota % 3];
        let total_avail: u64 = avail.iter().sum();
        if total_avail < quota {
            for (i, &t) in MIX_TIERS.iter().enumerate() {
                if avail[i] < share[i] {
                    short.push(Shortfall {
                        stage: None,
                        domain: Some(d),
                        tier: Some(t),
                        group: None,
                        deficit: share[i] - avail[i],
                    });
                }
            }
            continue;
        }
        let mut take: Vec<u64> = (0..3).map(|i| share[i].min(avail[i])).collect();
        let mut left = quota - take.iter().sum::<u64>();
        for i in (0..3).rev() {
            let extra = left.min(avail[i] - take[i]);
            take[i] += extra;
            left -= extra;
        }
        for (i, ps) in tier_pools.iter().enumerate() {
            allocations.extend(spread(take[i], ps));
        }
    }
    if !short.is_empty() {
        return Err(Error::Shortfall(short));
    }
    Ok(schedule(Strategy::Mix, domain_mix.clone(), vec![StageManifest::new(0, allocations)]))
}

/// `n_stages` stages of `budget / n_stages` tokens (remainder to the last);
/// stage `i` draws only from tier `L(i+1)` with the domain mix applied
/// inside every stage.
pub fn build_tiered_schedule(pools: &[PoolStats], budget: u64, domain_mix: &BTreeMap<Domain, f64>, n_stages: usize) -> Result<Schedule> {
    check_mix(domain_mix)?;
    check_unique(&pools.iter().collect::<Vec<_>>())?;
    if !(1..=4).contains(&n_stages) {
        return Err(Error::Config(format!("n_stages must be in 1..=4, got {n_stages}")));
    }
    let per = budget / n_stages as u64;
    let mut stages = Vec::new();
    let mut short = Vec::new();
    for i in 0..n_stages {
        let stage_budget = if i + 1 == n_stages { budget - per * (n_stages as u64 - 1) } else { per };
        let tier = TierLabel::from_index(i + 1).expect("at most L4");
        let mut allocations = Vec::new();
        for (d, quota) in domain_quotas(stage_budget, domain_mix) {
            let ps = pools_of(pools, d, tier);
            let avail: u64 = ps.iter().map(|p| p.available_tokens).sum();
            if avail < quota {
                short.push(Shortfall {
                    stage: Some(i),
                    domain: Some(d),
                    tier: Some(tier),
                    group: None,
                    deficit: quota - avail,
                });
                continue;
            }
            allocations.extend(spread(quota, &ps));
        }
        stages.push(StageManifest::new(i, allocations));
    }
    if !short.is_empty() {
        return Err(Error::Shortfall(short));
    }
    Ok(schedule(Strategy::Tiered, domain_mix.clone(), stages))
}

/// One stage with `round(budget * fraction)` tokens from the verification
/// pools and the rest from the default pools, each side in proportion to
/// availability.
pub fn build_decay_mix(default_pools: &[PoolStats], verification_pools: &[PoolStats], budget: u64, verification_fraction: f64) -> Result<Schedule> {
    if !(0.0..=1.0).contains(&verification_fraction) {
        return Err(Error::Config(format!("verification fraction {verification_fraction} outside [0,1]")));
    }
    let all: Vec<&PoolStats> = default_pools.iter().chain(verification_pools).collect();
    check_unique(&all)?;
    let v = ((budget as f64) * verification_fraction).round() as u64;
    let sides = [("default", default_pools, budget - v), ("verification", verification_pools, v)];
    let mut allocations = Vec::new();
    let mut short = Vec::new();
    for (name, ps, tokens) in sides {
        let avail: u64 = ps.iter().map(|p| p.available_tokens).sum();
        if avail < tokens {
            short.push(Shortfall {
                stage: None,
                domain: None,
                tier: None,
                group: Some(name.to_string()),
                deficit: tokens - avail,
            });
            continue;
        }
        allocations.extend(spread(tokens, &ps.iter().collect::<Vec<_>>()));
    }
    if !short.is_empty() {
        return Err(Error::Shortfall(short));
    }
    let stage = StageManifest::new(0, allocations);
    let mut mix = BTreeMap::new();
    if stage.stage_tokens > 0 {
        for a in &stage.allocations {
            let d = all.iter().find(|p| p.pool_id == a.pool).expect("allocated pool").domain;
            *mix.entry(d).or_insert(0.0) += a.tokens as f64 / stage.stage_tokens as f64;
        }
    }
    let mut s = schedule(Strategy::DecayMix, mix, vec![stage]);
    s.verification_fraction = Some(verification_fraction);
    s.verification_pools = verification_pools.iter().map(|p| p.pool_id.clone()).collect();
    Ok(s)
}

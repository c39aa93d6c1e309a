//! Training-mixture schedules over tier-labelled token pools.

mod build;
mod materialize;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use build::{build_decay_mix, build_mix_schedule, build_tiered_schedule, parse_mix, DEFAULT_VERIFICATION_FRACTION};
pub use materialize::{materialize, Materialized, MaterializedStage};
pub use validate::{validate_manifest, ValidationReport, Violation};

use crate::corpus::{Domain, Record, TierLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenEstimator {
    #[default]
    Whitespace,
    CharsDiv4,
}

impl FromStr for TokenEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "whitespace" => Ok(TokenEstimator::Whitespace),
            "chars_div_4" | "chars_div4" => Ok(TokenEstimator::CharsDiv4),
            other => Err(Error::Config(format!("unknown token estimator {other:?}"))),
        }
    }
}

pub fn count_tokens(text: &str, est: TokenEstimator) -> u64 {
    match est {
        TokenEstimator::Whitespace => text.split_whitespace().count() as u64,
        TokenEstimator::CharsDiv4 => (text.chars().count() as u64).div_ceil(4),
    }
}

pub fn token_count(record: &Record, est: TokenEstimator) -> u64 {
    count_tokens(&record.text, est)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub pool_id: String,
    pub domain: Domain,
    pub tier: TierLabel,
    pub available_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: String,
    pub tokens: u64,
}

/// A pool's statistics together with its records, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub stats: PoolStats,
    pub items: Vec<PoolItem>,
}

/// Groups records into one pool per (domain, tier), with ids
/// `{prefix}{domain}.{tier}`, sorted by pool id.
pub fn build_pools(records: &[Record], est: TokenEstimator, prefix: &str) -> Vec<Pool> {
    let mut groups: BTreeMap<(Domain, TierLabel), Vec<PoolItem>> = BTreeMap::new();
    for r in records {
        groups.entry((r.source.domain, r.tier)).or_default().push(PoolItem {
            id: r.id.clone(),
            tokens: token_count(r, est),
        });
    }
    let mut pools: Vec<Pool> = groups
        .into_iter()
        .map(|((domain, tier), items)| Pool {
            stats: PoolStats {
                pool_id: format!("{prefix}{domain}.{tier}"),
                domain,
                tier,
                available_tokens: items.iter().map(|i| i.tokens).sum(),
            },
            items,
        })
        .collect();
    pools.sort_by(|a, b| a.stats.pool_id.cmp(&b.stats.pool_id));
    pools
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Mix,
    Tiered,
    DecayMix,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mix" => Ok(Strategy::Mix),
            "tiered" => Ok(Strategy::Tiered),
            "decay" | "decay_mix" => Ok(Strategy::DecayMix),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub pool: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage_index: usize,
    pub allocations: Vec<Allocation>,
    pub stage_tokens: u64,
}

impl StageManifest {
    fn new(stage_index: usize, allocations: Vec<Allocation>) -> Self {
        let allocations: Vec<Allocation> = allocations.into_iter().filter(|a| a.tokens > 0).collect();
        StageManifest {
            stage_index,
            stage_tokens: allocations.iter().map(|a| a.tokens).sum(),
            allocations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub strategy: Strategy,
    pub estimator: TokenEstimator,
    pub domain_mix: BTreeMap<Domain, f64>,
    pub stages: Vec<StageManifest>,
    pub total_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verification_pools: Vec<String>,
}

impl Schedule {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One unmet requirement in an infeasible schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<TierLabel>,
    /// Names a pool group when domain and tier do not apply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub deficit: u64,
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.stage {
            write!(f, "stage {s} ")?;
        }
        match (self.domain, self.tier, &self.group) {
            (Some(d), Some(t), _) => write!(f, "{d}/{t}")?,
            (Some(d), None, _) => write!(f, "{d}")?,
            (None, Some(t), _) => write!(f, "{t}")?,
            (None, None, Some(g)) => write!(f, "{g} pools")?,
            (None, None, None) => write!(f, "pools")?,
        }
        write!(f, " short by {} tokens", self.deficit)
    }
}

/// Splits `total` in proportion to `weights` by largest remainder, ties to
/// the later index. When `total <= sum(weights)` no share exceeds its weight.
pub(crate) fn apportion(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| u128::from(w)).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let t = u128::from(total);
    let mut shares: Vec<u64> = weights.iter().map(|&w| (t * u128::from(w) / sum) as u64).collect();
    let mut left = total - shares.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (t * u128::from(weights[a]) % sum, t * u128::from(weights[b]) % sum);
        rb.cmp(&ra).then(b.cmp(&a))
    });
    for i in order {
        if left == 0 {
            break;
        }
        shares[i] += 1;
        left -= 1;
    }
    shares
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, SourceMeta};
    use proptest::prelude::*;

    #[test]
    fn estimators() {
        assert_eq!(count_tokens("a b c", TokenEstimator::Whitespace), 3);
        assert_eq!(count_tokens("", TokenEstimator::Whitespace), 0);
        assert_eq!(count_tokens("", TokenEstimator::CharsDiv4), 0);
        assert_eq!(count_tokens("abcdefgh", TokenEstimator::CharsDiv4), 2);
        assert_eq!(count_tokens("abcdefghi", TokenEstimator::CharsDiv4), 3);
        assert_eq!("chars-div-4".parse::<TokenEstimator>().unwrap(), TokenEstimator::CharsDiv4);
    }

    #[test]
    fn pools_group_by_domain_and_tier() {
        let a = new_record("one two", SourceMeta::new("a", "s", Domain::Math));
        let b = new_record("three", SourceMeta::new("b", "s", Domain::Math));
        let c = new_record("x", SourceMeta::new("c", "s", Domain::Code));
        let pools = build_pools(&[a, b, c], TokenEstimator::Whitespace, "");
        let ids: Vec<_> = pools.iter().map(|p| (p.stats.pool_id.as_str(), p.stats.available_tokens)).collect();
        assert_eq!(ids, vec![("code.L0", 1), ("math.L0", 3)]);
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, &[1, 1, 1]), vec![3, 3, 4]);
        assert_eq!(apportion(0, &[5, 5]), vec![0, 0]);
        assert_eq!(apportion(7, &[0, 0]), vec![0, 0]);
        assert_eq!(apportion(6, &[6, 0, 12]), vec![2, 0, 4]);
    }

    proptest! {
        #[test]
        fn apportion_conserves_and_caps(w in proptest::collection::vec(0u64..1000, 1..8), frac in 0.0f64..=1.0) {
            let sum: u64 = w.iter().sum();
            prop_assume!(sum > 0);
            let total = (sum as f64 * frac) as u64;
            let s = apportion(total, &w);
            prop_assert_eq!(s.iter().sum::<u64>(), total);
            for (a, b) in s.iter().zip(&w) {
                prop_assert!(a <= b);
            }
        }
    }
}

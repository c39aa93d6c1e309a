use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, TierLabel};
use crate::dedup::NearDedupConfig;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::hashing::params_hash;
use crate::ingest::RawSourceFormat;
use crate::organize::DEFAULT_MAX_CHUNK_CHARS;
use crate::refine::RefineConfig;
use crate::schedule::{Strategy, TokenEstimator, DEFAULT_VERIFICATION_FRACTION};
use crate::select::{Hyper, SelectPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Filter,
    Dedup,
    Classify,
    Select,
    Refine,
    Organize,
    Schedule,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Dedup,
        Stage::Classify,
        Stage::Select,
        Stage::Refine,
        Stage::Organize,
        Stage::Schedule,
    ];

    /// Stages run when none are named.
    pub const DEFAULT: [Stage; 7] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Dedup,
        Stage::Classify,
        Stage::Select,
        Stage::Refine,
        Stage::Organize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Dedup => "dedup",
            Stage::Classify => "classify",
            Stage::Select => "select",
            Stage::Refine => "refine",
            Stage::Organize => "organize",
            Stage::Schedule => "schedule",
        }
    }

    /// Directory name under the work dir, for stages that write records.
    pub fn output_dir(self) -> Option<&'static str> {
        match self {
            Stage::Ingest => Some("l0"),
            Stage::Filter => Some("l1"),
            Stage::Dedup => Some("l1_dedup"),
            Stage::Select => Some("l2"),
            Stage::Refine => Some("l3"),
            Stage::Organize => Some("l4"),
            Stage::Classify | Stage::Schedule => None,
        }
    }

    pub fn output_tier(self) -> Option<TierLabel> {
        match self {
            Stage::Ingest => Some(TierLabel::L0),
            Stage::Filter | Stage::Dedup => Some(TierLabel::L1),
            Stage::Select => Some(TierLabel::L2),
            Stage::Refine => Some(TierLabel::L3),
            Stage::Organize => Some(TierLabel::L4),
            Stage::Classify | Stage::Schedule => None,
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Rejects repeated or out-of-order stages.
pub fn check_stage_order(stages: &[Stage]) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::Config("no stages to run".into()));
    }
    for w in stages.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "stage {} cannot run after {}; order is ingest, filter, dedup, classify, select, refine, organize, schedule",
                w[1].as_str(),
                w[0].as_str()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Raw files or directories for ingest; otherwise a tier directory
    /// feeding the first stage.
    pub input: Vec<PathBuf>,
    pub input_format: RawSourceFormat,
    pub domain: Domain,
    pub snapshot: String,
    pub work_dir: PathBuf,
    /// Defaults to available parallelism.
    pub worker_count: Option<usize>,
    pub shard_size: usize,
    /// Stamp time for every op; fixing it makes shards byte-reproducible.
    pub fixed_timestamp: Option<u64>,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            input: Vec::new(),
            input_format: RawSourceFormat::Jsonl,
            domain: Domain::WebEn,
            snapshot: String::new(),
            work_dir: PathBuf::from("udt-work"),
            worker_count: None,
            shard_size: 10_000,
            fixed_timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    /// Classifier shuffling, refinement planning, materialization.
    pub rng_seed: u64,
    /// MinHash salts and classifier feature hashing.
    pub hash_seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Positive and negative seed documents, JSONL with a `text` field.
    pub positive: Option<PathBuf>,
    pub negative: Option<PathBuf>,
    /// Use this model instead of training one.
    pub model: Option<PathBuf>,
    pub hyper: Hyper,
    /// Fit the ordinal scale to score quantiles of the select input.
    pub calibrate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub endpoint: Option<String>,
    /// Mock script JSON; with neither set the identity mock is used.
    pub mock: Option<PathBuf>,
    pub timeout_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            endpoint: None,
            mock: None,
            timeout_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrganizeConfig {
    pub max_chunk_chars: usize,
    /// Tiers of the organize input that get chunked.
    pub tiers: Vec<TierLabel>,
}

impl Default for OrganizeConfig {
    fn default() -> Self {
        OrganizeConfig {
            max_chunk_chars: DEFAULT_MAX_CHUNK_CHARS,
            tiers: vec![TierLabel::L3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub strategy: Strategy,
    pub budget: u64,
    pub domain_mix: BTreeMap<Domain, f64>,
    pub n_stages: usize,
    pub verification_fraction: f64,
    pub estimator: TokenEstimator,
    /// Tier directories read as verification pools for decay mixes.
    pub verification_input: Vec<PathBuf>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            strategy: Strategy::Tiered,
            budget: 0,
            domain_mix: BTreeMap::from([(Domain::WebEn, 1.0)]),
            n_stages: 3,
            verification_fraction: DEFAULT_VERIFICATION_FRACTION,
            estimator: TokenEstimator::Whitespace,
            verification_input: Vec::new(),
        }
    }
}

fn default_lang() -> String {
    "en".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub io: IoConfig,
    pub seeds: SeedConfig,
    pub stages: Vec<Stage>,
    /// Target language for L1 filtering.
    #[serde(default = "default_lang")]
    pub lang: String,
    pub filter: FilterConfig,
    pub dedup: NearDedupConfig,
    pub classify: ClassifyConfig,
    pub select: SelectPolicy,
    pub generator: GeneratorConfig,
    pub refine: RefineConfig,
    pub organize: OrganizeConfig,
    pub schedule: ScheduleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            io: IoConfig::default(),
            seeds: SeedConfig::default(),
            stages: Stage::DEFAULT.to_vec(),
            lang: default_lang(),
            filter: FilterConfig::default(),
            dedup: NearDedupConfig::default(),
            classify: ClassifyConfig::default(),
            select: SelectPolicy::Threshold { threshold: 0.5 },
            generator: GeneratorConfig::default(),
            refine: RefineConfig::default(),
            organize: OrganizeConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

fn seed_conflict(section: &str, value: u64, want: u64, key: &str) -> Result<()> {
    if value != 0 && value != want {
        return Err(Error::Config(format!("{section} seed {value} conflicts with seeds.{key} {want}; set it under seeds")));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.apply_seeds()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Copies the `seeds` section into every module config that carries a
    /// seed of its own. A module seed may only repeat the global value.
    pub fn apply_seeds(&mut self) -> Result<()> {
        let s = self.seeds.clone();
        seed_conflict("dedup", self.dedup.seed, s.hash_seed, "hash_seed")?;
        seed_conflict("classify.hyper", self.classify.hyper.rng_seed, s.rng_seed, "rng_seed")?;
        seed_conflict("refine", self.refine.rng_seed, s.rng_seed, "rng_seed")?;
        self.dedup.seed = s.hash_seed;
        self.classify.hyper.rng_seed = s.rng_seed;
        self.refine.rng_seed = s.rng_seed;
        Ok(())
    }

    /// Hash of the resolved configuration; printed in run reports.
    pub fn config_hash(&self) -> String {
        params_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_stage_order(&self.stages)?;
        self.filter.validate()?;
        self.refine.validate.validate()?;
        if self.io.shard_size == 0 {
            return Err(Error::Config("io.shard_size must be >= 1".into()));
        }
        if self.io.worker_count == Some(0) {
            return Err(Error::Config("io.worker_count must be >= 1".into()));
        }
        if self.generator.endpoint.is_some() && self.generator.mock.is_some() {
            return Err(Error::Config("generator.endpoint and generator.mock are exclusive".into()));
        }
        if self.organize.max_chunk_chars == 0 {
            return Err(Error::Config("organize.max_chunk_chars must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_order() {
        assert!(check_stage_order(&[Stage::Select, Stage::Filter]).is_err());
        assert!(check_stage_order(&[Stage::Filter, Stage::Filter]).is_err());
        assert!(check_stage_order(&[Stage::Dedup]).is_ok());
        assert!(check_stage_order(&Stage::DEFAULT).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json(r#"{"io": {"wrok_dir": "x"}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"filtre": {}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"filter": {"short_line_len": 20}}"#).is_ok());
    }

    #[test]
    fn seeds_propagate() {
        let c = PipelineConfig::from_json(r#"{"seeds": {"rng_seed": 5, "hash_seed": 9}}"#).unwrap();
        assert_eq!((c.dedup.seed, c.classify.hyper.rng_seed, c.refine.rng_seed), (9, 5, 5));
        assert!(PipelineConfig::from_json(r#"{"seeds": {"hash_seed": 9}, "dedup": {"seed": 3}}"#).is_err());
        let a = PipelineConfig::from_json(r#"{"seeds": {"rng_seed": 1}}"#).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{params_hash, FieldHasher};

/// Quality level of a record. Ordered `L0 < L1 < L2 < L3 < L4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TierLabel {
    L0,
    L1,
    L2,
    L3,
    L4,
}

impl TierLabel {
    pub const ALL: [TierLabel; 5] = [
        TierLabel::L0,
        TierLabel::L1,
        TierLabel::L2,
        TierLabel::L3,
        TierLabel::L4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<TierLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TierLabel::L0 => "L0",
            TierLabel::L1 => "L1",
            TierLabel::L2 => "L2",
            TierLabel::L3 => "L3",
            TierLabel::L4 => "L4",
        }
    }
}

impl fmt::Display for TierLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TierLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown tier {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    WebEn,
    WebZh,
    Math,
    Code,
    Other,
}

impl Domain {
    pub const ALL: [Domain; 5] = [Domain::WebEn, Domain::WebZh, Domain::Math, Domain::Code, Domain::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::WebEn => "web_en",
            Domain::WebZh => "web_zh",
            Domain::Math => "math",
            Domain::Code => "code",
            Domain::Other => "other",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown domain {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceMeta {
    pub url: String,
    /// Crawl snapshot id; empty for non-crawl sources.
    pub snapshot: String,
    pub domain: Domain,
}

impl SourceMeta {
    pub fn new(url: impl Into<String>, snapshot: impl Into<String>, domain: Domain) -> Self {
        SourceMeta {
            url: url.into(),
            snapshot: snapshot.into(),
            domain,
        }
    }
}

/// Audit entry appended by every operator that derives a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpStamp {
    pub name: String,
    pub version: String,
    pub params_hash: String,
    pub timestamp: u64,
}

impl OpStamp {
    /// Stamp for operator `name` configured by `params`. `timestamp` of `None`
    /// uses the current wall clock.
    pub fn new<P: Serialize + ?Sized>(name: &str, params: &P, timestamp: Option<u64>) -> Self {
        assert!(!name.is_empty(), "operator name must be nonempty");
        OpStamp {
            name: name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params_hash: params_hash(params),
            timestamp: timestamp.unwrap_or_else(now_secs),
        }
    }
}

/// Run-wide inputs folded into every stamp: a fixed clock (for reproducible
/// shards) and the run's seeds, which enter each `params_hash`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpContext {
    pub timestamp: Option<u64>,
    pub seeds: serde_json::Value,
}

impl OpContext {
    pub fn fixed(timestamp: u64) -> Self {
        OpContext {
            timestamp: Some(timestamp),
            seeds: serde_json::Value::Null,
        }
    }

    pub fn with_seeds(mut self, seeds: serde_json::Value) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn stamp<P: Serialize + ?Sized>(&self, name: &str, params: &P) -> OpStamp {
        let params = serde_json::json!({ "params": params, "seeds": self.seeds });
        OpStamp::new(name, &params, self.timestamp)
    }
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub tier: TierLabel,
    pub source: SourceMeta,
    pub lang: Option<String>,
    pub scores: BTreeMap<String, f64>,
    pub parents: Vec<String>,
    pub ops: Vec<OpStamp>,
    pub meta: BTreeMap<String, String>,
}

fn l0_id(source: &SourceMeta, payload: &[u8]) -> String {
    let mut h = FieldHasher::new("udt:l0");
    h.field(source.url.as_bytes())
        .field(source.snapshot.as_bytes())
        .field(payload);
    h.finish_id()
}

fn derived_id(parents: &[String], op: &OpStamp, text: &str) -> String {
    let mut h = FieldHasher::new("udt:derived");
    h.count(parents.len() as u64);
    for p in parents {
        h.field(p.as_bytes());
    }
    h.field(op.name.as_bytes())
        .field(op.params_hash.as_bytes())
        .field(text.as_bytes());
    h.finish_id()
}

/// Registers an L0 record. The id depends on `(url, snapshot, text bytes)`.
pub fn new_record(text: &str, source: SourceMeta) -> Record {
    Record {
        id: l0_id(&source, text.as_bytes()),
        text: text.to_string(),
        tier: TierLabel::L0,
        source,
        lang: None,
        scores: BTreeMap::new(),
        parents: Vec::new(),
        ops: Vec::new(),
        meta: BTreeMap::new(),
    }
}

/// Like [`new_record`] for raw bytes, rejecting invalid UTF-8.
pub fn new_record_bytes(payload: &[u8], source: SourceMeta) -> Result<Record> {
    let text = std::str::from_utf8(payload).map_err(|e| Error::Encoding(e.to_string()))?;
    Ok(new_record(text, source))
}

/// Derives a record at `new_tier` from `record`. Scores, lang and meta carry
/// over; the id covers only parents, the op stamp and the new text.
pub fn promote(
    record: &Record,
    new_tier: TierLabel,
    op: OpStamp,
    new_text: String,
    extra_parents: &[String],
) -> Result<Record> {
    if new_tier < record.tier {
        return Err(Error::TierRegression {
            from: record.tier,
            to: new_tier,
        });
    }
    let mut parents = Vec::with_capacity(1 + extra_parents.len());
    parents.push(record.id.clone());
    parents.extend(extra_parents.iter().cloned());
    let id = derived_id(&parents, &op, &new_text);
    let mut ops = record.ops.clone();
    ops.push(op);
    Ok(Record {
        id,
        text: new_text,
        tier: new_tier,
        source: record.source.clone(),
        lang: record.lang.clone(),
        scores: record.scores.clone(),
        parents,
        ops,
        meta: record.meta.clone(),
    })
}

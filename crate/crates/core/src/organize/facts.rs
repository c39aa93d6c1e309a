use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactStatus {
    Unverified,
    Verified,
    Contradicted,
}

impl fmt::Display for FactStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactStatus::Unverified => "unverified",
            FactStatus::Verified => "verified",
            FactStatus::Contradicted => "contradicted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRecord {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub evidence: String,
    pub status: FactStatus,
}

/// Case-folded, whitespace-collapsed form used for all triple matching.
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Registered facts plus the chunk ids they may cite.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    chunks: BTreeSet<String>,
    facts: Vec<FactRecord>,
}

impl FactStore {
    pub fn new<I: IntoIterator<Item = String>>(chunk_ids: I) -> Self {
        FactStore {
            chunks: chunk_ids.into_iter().collect(),
            facts: Vec::new(),
        }
    }

    pub fn facts(&self) -> &[FactRecord] {
        &self.facts
    }

    /// Stores an unverified fact. Re-registering the same triple and
    /// evidence returns the stored record unchanged.
    pub fn register_fact(&mut self, subject: &str, relation: &str, object: &str, evidence: &str) -> Result<FactRecord> {
        if !self.chunks.contains(evidence) {
            return Err(Error::DanglingEvidence(evidence.to_string()));
        }
        let key = (normalize_term(subject), normalize_term(relation), normalize_term(object));
        if let Some(f) = self
            .facts
            .iter()
            .find(|f| f.evidence == evidence && (normalize_term(&f.subject), normalize_term(&f.relation), normalize_term(&f.object)) == key)
        {
            return Ok(f.clone());
        }
        let f = FactRecord {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
            evidence: evidence.to_string(),
            status: FactStatus::Unverified,
        };
        self.facts.push(f.clone());
        Ok(f)
    }

    /// Verifies every unverified fact; terminal facts are left alone.
    pub fn verify_all(&mut self, trusted: &TrustedStore) -> BTreeMap<FactStatus, u64> {
        for f in self.facts.iter_mut().filter(|f| f.status == FactStatus::Unverified) {
            f.status = trusted.judge(f);
        }
        let mut counts = BTreeMap::new();
        for f in &self.facts {
            *counts.entry(f.status).or_default() += 1;
        }
        counts
    }

    /// Loads facts from JSONL, checking each evidence id against the store.
    pub fn load_facts(&mut self, path: &Path) -> Result<()> {
        for f in read_jsonl::<FactRecord>(path)? {
            if !self.chunks.contains(&f.evidence) {
                return Err(Error::DanglingEvidence(f.evidence));
            }
            self.facts.push(f);
        }
        Ok(())
    }

    pub fn save_facts(&self, path: &Path) -> Result<()> {
        crate::corpus::write_atomic(path, |w| {
            for f in &self.facts {
                serde_json::to_writer(&mut *w, f)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripleLine {
    s: String,
    r: String,
    o: String,
}

/// Normalized trusted triples, grouped by (subject, relation).
#[derive(Debug, Clone, Default)]
pub struct TrustedStore {
    objects: BTreeMap<(String, String), BTreeSet<String>>,
}

impl TrustedStore {
    pub fn insert(&mut self, s: &str, r: &str, o: &str) {
        self.objects
            .entry((normalize_term(s), normalize_term(r)))
            .or_default()
            .insert(normalize_term(o));
    }

    /// Reads `{"s":..,"r":..,"o":..}` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let mut t = TrustedStore::default();
        for l in read_jsonl::<TripleLine>(path)? {
            t.insert(&l.s, &l.r, &l.o);
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.objects.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Any trusted object for the same subject and relation that differs
    /// from the fact's object contradicts it.
    fn judge(&self, f: &FactRecord) -> FactStatus {
        match self.objects.get(&(normalize_term(&f.subject), normalize_term(&f.relation))) {
            Some(objs) if objs.contains(&normalize_term(&f.object)) => FactStatus::Verified,
            Some(objs) if !objs.is_empty() => FactStatus::Contradicted,
            _ => FactStatus::Unverified,
        }
    }
}

pub fn verify_fact(fact: &FactRecord, trusted: &TrustedStore) -> Result<FactRecord> {
    if fact.status != FactStatus::Unverified {
        return Err(Error::StatusTransition(fact.status.to_string()));
    }
    Ok(FactRecord {
        status: trusted.judge(fact),
        ..fact.clone()
    })
}

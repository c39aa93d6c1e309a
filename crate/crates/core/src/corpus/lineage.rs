use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::Serialize;

use super::record::{OpStamp, Record, TierLabel};
use super::shard::read_dir;
use crate::error::{Error, Result};

/// In-memory id index over a set of shard directories.
#[derive(Debug, Default)]
pub struct RecordStore {
    records: HashMap<String, Record>,
}

impl RecordStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dirs<P: AsRef<Path>>(dirs: &[P]) -> Result<Self> {
        let mut store = RecordStore::new();
        for d in dirs {
            store.extend(read_dir(d.as_ref())?.records);
        }
        Ok(store)
    }

    pub fn insert(&mut self, record: Record) {
        self.records.insert(record.id.clone(), record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = Record>) {
        for r in records {
            self.insert(r);
        }
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.records.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineageNode {
    pub id: String,
    pub tier: TierLabel,
    pub parents: Vec<String>,
    pub ops: Vec<OpStamp>,
}

/// Ancestry DAG of one record, including the record itself.
#[derive(Debug, Clone, Serialize)]
pub struct Lineage {
    pub root: String,
    /// Nodes in breadth-first discovery order from `root`.
    pub nodes: Vec<LineageNode>,
}

impl Lineage {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ancestors with no parents; always L0 for a traced lineage.
    pub fn origins(&self) -> Vec<&LineageNode> {
        self.nodes.iter().filter(|n| n.parents.is_empty()).collect()
    }

    /// Nodes ordered by tier, then id.
    pub fn chain(&self) -> Vec<&LineageNode> {
        let mut v: Vec<_> = self.nodes.iter().collect();
        v.sort_by(|a, b| a.tier.cmp(&b.tier).then_with(|| a.id.cmp(&b.id)));
        v
    }

    pub fn edges(&self) -> BTreeMap<&str, &[String]> {
        self.nodes.iter().map(|n| (n.id.as_str(), n.parents.as_slice())).collect()
    }
}

/// Walks parent links from `id` to the L0 origins. Fails on unknown ids,
/// dangling parents, tier regressions along an edge, cycles, and parentless
/// records above L0.
pub fn trace_lineage(id: &str, store: &RecordStore) -> Result<Lineage> {
    let start = store.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
    let mut nodes = Vec::new();
    let mut visited: HashSet<&str> = HashSet::new();
    let mut queue: VecDeque<&Record> = VecDeque::new();
    visited.insert(&start.id);
    queue.push_back(start);
    while let Some(rec) = queue.pop_front() {
        if rec.parents.is_empty() && rec.tier != TierLabel::L0 {
            return Err(Error::LineageRoot(rec.id.clone()));
        }
        for pid in &rec.parents {
            let parent = store.get(pid).ok_or_else(|| Error::BrokenLineage {
                child: rec.id.clone(),
                missing: pid.clone(),
            })?;
            if parent.tier > rec.tier {
                return Err(Error::TierRegression {
                    from: parent.tier,
                    to: rec.tier,
                });
            }
            if pid == id {
                return Err(Error::LineageCycle(pid.clone()));
            }
            if visited.insert(pid.as_str()) {
                queue.push_back(parent);
            }
        }
        nodes.push(LineageNode {
            id: rec.id.clone(),
            tier: rec.tier,
            parents: rec.parents.clone(),
            ops: rec.ops.clone(),
        });
    }
    check_acyclic(&nodes)?;
    Ok(Lineage {
        root: id.to_string(),
        nodes,
    })
}

/// Kahn's algorithm over the traced sub-DAG.
fn check_acyclic(nodes: &[LineageNode]) -> Result<()> {
    let mut indegree: HashMap<&str, usize> = nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    for n in nodes {
        for p in &n.parents {
            *indegree.get_mut(p.as_str()).expect("parent traced") += 1;
        }
    }
    let by_id: HashMap<&str, &LineageNode> = nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut seen = 0;
    while let Some(id) = ready.pop() {
        seen += 1;
        for p in &by_id[id].parents {
            let d = indegree.get_mut(p.as_str()).expect("parent traced");
            *d -= 1;
            if *d == 0 {
                ready.push(p);
            }
        }
    }
    if seen != nodes.len() {
        let stuck = indegree.iter().find(|(_, d)| **d > 0).map(|(k, _)| k.to_string()).unwrap_or_default();
        return Err(Error::LineageCycle(stuck));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, promote, Domain, SourceMeta};

    fn op(name: &str) -> OpStamp {
        OpStamp::new(name, "p", Some(0))
    }

    fn chain() -> Vec<Record> {
        let l0 = new_record("t", SourceMeta::new("u", "s", Domain::WebEn));
        let l1 = promote(&l0, TierLabel::L1, op("filter"), "t".into(), &[]).unwrap();
        let l2 = promote(&l1, TierLabel::L2, op("select"), "t".into(), &[]).unwrap();
        let l3 = promote(&l2, TierLabel::L3, op("refine"), "t2".into(), &[]).unwrap();
        vec![l0, l1, l2, l3]
    }

    #[test]
    fn l0_lineage_is_itself() {
        let recs = chain();
        let mut store = RecordStore::new();
        store.extend(recs.clone());
        let lin = trace_lineage(&recs[0].id, &store).unwrap();
        assert_eq!(lin.len(), 1);
        assert_eq!(lin.origins()[0].id, recs[0].id);
    }

    #[test]
    fn four_node_chain_in_tier_order() {
        let recs = chain();
        let mut store = RecordStore::new();
        store.extend(recs.clone());
        let lin = trace_lineage(&recs[3].id, &store).unwrap();
        let tiers: Vec<_> = lin.chain().iter().map(|n| n.tier).collect();
        assert_eq!(tiers, vec![TierLabel::L0, TierLabel::L1, TierLabel::L2, TierLabel::L3]);
        assert_eq!(lin.chain()[3].ops.len(), 3);
    }

    #[test]
    fn missing_parent_is_broken_lineage() {
        let recs = chain();
        let mut store = RecordStore::new();
        store.extend(recs.iter().skip(1).cloned());
        match trace_lineage(&recs[3].id, &store) {
            Err(Error::BrokenLineage { missing, .. }) => assert_eq!(missing, recs[0].id),
            other => panic!("expected broken lineage, got {other:?}"),
        }
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(trace_lineage("nope", &RecordStore::new()), Err(Error::UnknownId(_))));
    }

    #[test]
    fn cycle_is_detected() {
        let mut a = chain().remove(1);
        let mut b = a.clone();
        a.id = "a".into();
        b.id = "b".into();
        a.parents = vec!["b".into()];
        b.parents = vec!["a".into()];
        let mut store = RecordStore::new();
        store.extend([a, b]);
        assert!(matches!(trace_lineage("a", &store), Err(Error::LineageCycle(_))));
    }

    #[test]
    fn diamond_visits_shared_ancestor_once() {
        let recs = chain();
        let l0b = new_record("other", SourceMeta::new("u2", "s", Domain::WebEn));
        let l1b = promote(&l0b, TierLabel::L1, op("filter"), "other".into(), &[]).unwrap();
        let merged = promote(&recs[2], TierLabel::L3, op("merge"), "m".into(), &[l1b.id.clone(), recs[1].id.clone()]).unwrap();
        let mut store = RecordStore::new();
        store.extend(recs.clone());
        store.extend([l0b, l1b, merged.clone()]);
        let lin = trace_lineage(&merged.id, &store).unwrap();
        let ids: HashSet<_> = lin.nodes.iter().map(|n| n.id.clone()).collect();
        assert_eq!(ids.len(), lin.len());
        assert_eq!(lin.origins().len(), 2);
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 4] = b"UDTI";
pub const INDEX_VERSION: u32 = 1;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

/// Inverted index over chunks. Documents are numbered in chunk-id order, so
/// each posting list is sorted by chunk id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermIndex {
    pub chunk_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub avg_doc_length: f64,
}

pub fn build_index(chunks: &[Chunk]) -> TermIndex {
    let mut docs: Vec<&Chunk> = chunks.iter().collect();
    docs.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id));
    docs.dedup_by(|a, b| a.chunk_id == b.chunk_id);
    let mut idx = TermIndex::default();
    for (d, c) in docs.iter().enumerate() {
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        let mut len = 0u32;
        for t in tokenize(&c.text) {
            *tf.entry(t).or_default() += 1;
            len += 1;
        }
        for (t, n) in tf {
            idx.postings.entry(t).or_default().push((d as u32, n));
        }
        idx.chunk_ids.push(c.chunk_id.clone());
        idx.doc_lengths.push(len);
    }
    idx.refresh_stats();
    idx
}

impl TermIndex {
    fn refresh_stats(&mut self) {
        let n = self.doc_lengths.len();
        self.avg_doc_length = if n == 0 {
            0.0
        } else {
            self.doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / n as f64
        };
    }

    pub fn len(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_ids.is_empty()
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
    pub fn idf(&self, df: usize) -> f64 {
        let n = self.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 top-`k` over the distinct query tokens. Ties go to the smaller
    /// chunk id; only positive scores are returned.
    pub fn query<S: AsRef<str>>(&self, terms: &[S], k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::Config("query k must be >= 1".into()));
        }
        let terms: BTreeSet<String> = terms.iter().flat_map(|t| tokenize(t.as_ref()).collect::<Vec<_>>()).collect();
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &terms {
            let Some(plist) = self.postings.get(t) else { continue };
            let idf = self.idf(plist.len());
            for &(d, tf) in plist {
                let tf = f64::from(tf);
                let dl = f64::from(self.doc_lengths[d as usize]);
                let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self.avg_doc_length);
                *scores.entry(d).or_default() += idf * tf * (BM25_K1 + 1.0) / (tf + norm);
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
        // doc numbers follow chunk-id order, so they break ties directly
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked.into_iter().map(|(d, s)| (self.chunk_ids[d as usize].clone(), s)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        let put_u32 = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        put_u32(&mut out, self.chunk_ids.len() as u32);
        for (id, &len) in self.chunk_ids.iter().zip(&self.doc_lengths) {
            put_str(&mut out, id);
            put_u32(&mut out, len);
        }
        put_u32(&mut out, self.postings.len() as u32);
        for (term, plist) in &self.postings {
            put_str(&mut out, term);
            put_u32(&mut out, plist.len() as u32);
            for &(d, tf) in plist {
                put_u32(&mut out, d);
                put_u32(&mut out, tf);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::IndexFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let mut idx = TermIndex::default();
        let n = r.u32()? as usize;
        for _ in 0..n {
            idx.chunk_ids.push(r.string()?);
            idx.doc_lengths.push(r.u32()?);
        }
        let terms = r.u32()?;
        for _ in 0..terms {
            let term = r.string()?;
            let m = r.u32()? as usize;
            let mut plist = Vec::with_capacity(m.min(n));
            for _ in 0..m {
                let d = r.u32()?;
                if d as usize >= n {
                    return Err(Error::IndexFormat(format!("posting for {term:?} names document {d} of {n}")));
                }
                plist.push((d, r.u32()?));
            }
            idx.postings.insert(term, plist);
        }
        if r.pos != bytes.len() {
            return Err(Error::IndexFormat("trailing bytes".into()));
        }
        idx.refresh_stats();
        Ok(idx)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        crate::corpus::write_atomic(path, |w| std::io::Write::write_all(w, &bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::IndexFormat("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::IndexFormat(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            record_id: "r".into(),
            char_span: (0, text.chars().count()),
            text: text.into(),
        }
    }

    #[test]
    fn examples() {
        let empty = build_index(&[]);
        assert!(empty.query(&["x"], 5).unwrap().is_empty());
        let one = build_index(&[chunk("c", "a b a")]);
        assert_eq!(one.postings["a"], vec![(0, 2)]);
        assert_eq!(one.postings["b"], vec![(0, 1)]);
        let idx = build_index(&[chunk("A", "x x y"), chunk("B", "y")]);
        let hits = idx.query(&["x"], 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, "A");
        assert!(idx.query(&["zzz"], 10).unwrap().is_empty());
        assert!(idx.query(&["x"], 0).is_err());
    }

    #[test]
    fn hand_computed_score() {
        let idx = build_index(&[chunk("A", "x x y"), chunk("B", "y")]);
        // N=2, df(x)=1, |A|=3, avgdl=2
        let idf = (1.0f64 + 1.5 / 1.5).ln();
        let want = idf * 2.0 * 2.2 / (2.0 + 1.2 * (0.25 + 0.75 * 1.5));
        assert!((idx.query(&["x"], 1).unwrap()[0].1 - want).abs() < 1e-12);
    }

    #[test]
    fn ties_by_chunk_id() {
        let idx = build_index(&[chunk("b", "same words"), chunk("a", "same words"), chunk("c", "other")]);
        let ids: Vec<String> = idx.query(&["same"], 5).unwrap().into_iter().map(|x| x.0).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let idx = build_index(&[chunk("A", "x x y"), chunk("B", "y ü")]);
        let bytes = idx.to_bytes();
        assert_eq!(TermIndex::from_bytes(&bytes).unwrap(), idx);
        assert_eq!(build_index(&[chunk("A", "x x y"), chunk("B", "y ü")]).to_bytes(), bytes);
        assert!(TermIndex::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(TermIndex::from_bytes(b"NOPE").is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(TermIndex::from_bytes(&bad).is_err());
    }
}

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{promote, OpContext, Record, TierLabel};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 1200;
pub const CHUNK_OP: &str = "l4_chunk";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub record_id: String,
    /// Char offsets `[start, end)` into the record text.
    pub char_span: (usize, usize),
    pub text: String,
}

type Span = (usize, usize);

/// Maximal runs of non-gap chars; `is_gap(i)` marks separator positions.
fn runs(lo: usize, hi: usize, is_gap: impl Fn(usize) -> bool) -> Vec<Span> {
    let mut out = Vec::new();
    let mut start = None;
    for i in lo..hi {
        match (is_gap(i), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, hi));
    }
    out
}

fn paragraphs(chars: &[char]) -> Vec<Span> {
    // a newline belongs to a separator when it touches another newline
    let nl = |i: usize| chars.get(i) == Some(&'\n');
    runs(0, chars.len(), |i| nl(i) && ((i > 0 && nl(i - 1)) || nl(i + 1)))
}

fn sentences(chars: &[char], (lo, hi): Span) -> Vec<Span> {
    let mut gap = vec![false; hi - lo];
    let mut i = lo;
    while i < hi {
        if matches!(chars[i], '.' | '!' | '?') && i + 1 < hi && chars[i + 1].is_whitespace() {
            let mut j = i + 1;
            while j < hi && chars[j].is_whitespace() {
                gap[j - lo] = true;
                j += 1;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    runs(lo, hi, |i| gap[i - lo])
}

fn units(chars: &[char], max: usize) -> Vec<Span> {
    let mut out = Vec::new();
    for p in paragraphs(chars) {
        if p.1 - p.0 <= max {
            out.push(p);
            continue;
        }
        for s in sentences(chars, p) {
            let mut a = s.0;
            while a < s.1 {
                let b = (a + max).min(s.1);
                out.push((a, b));
                a = b;
            }
        }
    }
    out
}

/// Splits at blank-line paragraph breaks and packs paragraphs greedily up
/// to `max_chunk_chars`. Longer paragraphs fall back to sentence breaks,
/// then to fixed-width pieces. Separators between chunks are dropped.
pub fn chunk_document(record: &Record, max_chunk_chars: usize) -> Result<Vec<Chunk>> {
    if max_chunk_chars == 0 {
        return Err(Error::Config("max_chunk_chars must be >= 1".into()));
    }
    let chars: Vec<char> = record.text.chars().collect();
    let mut spans: Vec<Span> = Vec::new();
    for u in units(&chars, max_chunk_chars) {
        match spans.last_mut() {
            Some(last) if u.1 - last.0 <= max_chunk_chars => last.1 = u.1,
            _ => spans.push(u),
        }
    }
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| Chunk {
            chunk_id: format!("{}#{i:04}", record.id),
            record_id: record.id.clone(),
            char_span: (a, b),
            text: chars[a..b].iter().collect(),
        })
        .collect())
}

/// One L4 record per chunk, with `meta.chunk_id` and `meta.char_span`.
pub fn chunks_to_records(record: &Record, chunks: &[Chunk], ctx: &OpContext) -> Result<Vec<Record>> {
    chunks
        .iter()
        .map(|c| {
            let stamp = ctx.stamp(CHUNK_OP, &serde_json::json!({ "chunk_id": c.chunk_id, "span": c.char_span }));
            let mut r = promote(record, TierLabel::L4, stamp, c.text.clone(), &[])?;
            r.meta.insert("chunk_id".into(), c.chunk_id.clone());
            r.meta.insert("char_span".into(), format!("{}..{}", c.char_span.0, c.char_span.1));
            Ok(r)
        })
        .collect()
}

pub fn write_chunks(path: &Path, chunks: &[Chunk]) -> Result<()> {
    crate::corpus::write_atomic(path, |w| {
        for c in chunks {
            serde_json::to_writer(&mut *w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_chunks(path: &Path) -> Result<Vec<Chunk>> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, Domain, SourceMeta};
    use proptest::prelude::*;

    fn rec(text: &str) -> Record {
        new_record(text, SourceMeta::new("u", "s", Domain::Math))
    }

    fn reconstructs(text: &str, chunks: &[Chunk]) -> bool {
        let chars: Vec<char> = text.chars().collect();
        let mut pos = 0;
        let mut rebuilt = String::new();
        for c in chunks {
            let gap: String = chars[pos..c.char_span.0].iter().collect();
            if c.char_span.0 < pos || gap.chars().any(|ch| !ch.is_whitespace()) {
                return false;
            }
            rebuilt.push_str(&gap);
            rebuilt.push_str(&c.text);
            pos = c.char_span.1;
        }
        rebuilt.extend(&chars[pos..]);
        rebuilt == text && chars[pos..].iter().all(|c| c.is_whitespace())
    }

    #[test]
    fn size_examples() {
        let one = "a".repeat(500);
        let c = chunk_document(&rec(&one), 1200).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].char_span, (0, 500));
        let two = format!("{}\n\n{}", "b".repeat(800), "c".repeat(800));
        let c = chunk_document(&rec(&two), 1200).unwrap();
        assert_eq!(c.iter().map(|c| c.char_span).collect::<Vec<_>>(), vec![(0, 800), (802, 1602)]);
        let packed = format!("{}\n\n{}", "b".repeat(500), "c".repeat(500));
        assert_eq!(chunk_document(&rec(&packed), 1200).unwrap().len(), 1);
        assert!(chunk_document(&rec(""), 1200).unwrap().is_empty());
        assert_eq!(chunk_document(&rec(&one), 1200).unwrap()[0].chunk_id, format!("{}#0000", rec(&one).id));
    }

    #[test]
    fn long_paragraph_uses_sentences_then_hard_split() {
        let s = format!("{}. {}. {}", "x".repeat(30), "y".repeat(30), "z".repeat(70));
        let c = chunk_document(&rec(&s), 40).unwrap();
        let texts: Vec<&str> = c.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec![format!("{}.", "x".repeat(30)), format!("{}.", "y".repeat(30)), "z".repeat(40), "z".repeat(30)]);
        assert!(reconstructs(&s, &c));
    }

    #[test]
    fn chunk_records_are_l4() {
        let r = rec("one.\n\ntwo.");
        let chunks = chunk_document(&r, 4).unwrap();
        let recs = chunks_to_records(&r, &chunks, &OpContext::fixed(0)).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|x| x.tier == TierLabel::L4 && x.parents == vec![r.id.clone()]));
        assert_ne!(recs[0].id, recs[1].id);
    }

    proptest! {
        #[test]
        fn chunks_partition_text(text in "[a-zé .!?\n]{0,300}", max in 1usize..60) {
            let chunks = chunk_document(&rec(&text), max).unwrap();
            prop_assert!(reconstructs(&text, &chunks));
            for c in &chunks {
                prop_assert!(c.text.chars().count() <= max);
                prop_assert!(!c.text.is_empty());
            }
        }
    }
}

use std::collections::HashMap;

use unicode_normalization::UnicodeNormalization;

use super::DupLink;
use crate::corpus::Record;

/// NFC, then trimmed.
pub fn normalize_for_exact(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

#[derive(Debug, Default)]
pub struct ExactDedupOutput {
    pub unique: Vec<Record>,
    /// In stream order of the dropped records.
    pub dup_map: Vec<DupLink>,
}

/// Keeps the first record (stream order) of each normalized text.
pub fn exact_dedup(records: impl IntoIterator<Item = Record>) -> ExactDedupOutput {
    let mut first: HashMap<u128, String> = HashMap::new();
    let mut out = ExactDedupOutput::default();
    for r in records {
        let key = xxhash_rust::xxh3::xxh3_128(normalize_for_exact(&r.text).as_bytes());
        match first.get(&key) {
            Some(kept) => out.dup_map.push(DupLink {
                dup: r.id.clone(),
                kept: kept.clone(),
            }),
            None => {
                first.insert(key, r.id.clone());
                out.unique.push(r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, Domain, SourceMeta};

    fn rec(t: &str, i: usize) -> Record {
        new_record(t, SourceMeta::new(format!("u{i}"), "s", Domain::WebEn))
    }

    #[test]
    fn keeps_first_occurrence() {
        let rs = vec![rec("a", 1), rec("a", 2), rec("b", 3)];
        let out = exact_dedup(rs.clone());
        let kept: Vec<_> = out.unique.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(kept, vec!["a", "b"]);
        assert_eq!(out.dup_map, vec![DupLink { dup: rs[1].id.clone(), kept: rs[0].id.clone() }]);
    }

    #[test]
    fn distinct_stream_has_no_dups() {
        let out = exact_dedup((0..5).map(|i| rec(&format!("t{i}"), i)));
        assert!(out.dup_map.is_empty());
        assert_eq!(out.unique.len(), 5);
    }

    #[test]
    fn trim_and_nfc_normalization() {
        let out = exact_dedup(vec![rec("a ", 1), rec("a", 2)]);
        assert_eq!(out.unique.len(), 1);
        let out = exact_dedup(vec![rec("caf\u{e9}", 1), rec("cafe\u{301}", 2)]);
        assert_eq!(out.unique.len(), 1);
    }
}

//! L1 heuristic cleaning: format-repair mappers, C4-style line removal,
//! FineWeb-style document filters and trigram language identification.

mod langid;
mod quality;
mod repair;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use langid::{builtin_profiles, detect_language, LangProfile, UNDETERMINED};
pub use quality::{doc_quality_filter, FilterVerdict, RejectReason};
pub use repair::{c4_line_filter, repair_format, BoilerplatePatterns, DEFAULT_BOILERPLATE};

use crate::corpus::{promote, OpContext, Record, TierLabel};
use crate::error::{Error, Result};
use crate::ingest::{extract_text, CONTENT_TYPE_KEY, HTML_CONTENT_TYPE};

pub const OP_NAME: &str = "l1_filter";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub line_end_punct_max: f64,
    pub dup_line_char_min: f64,
    pub short_line_ratio_max: f64,
    pub short_line_len: usize,
    pub min_doc_chars: usize,
    pub max_doc_chars: usize,
    pub blacklist_phrases: Vec<String>,
    pub terminal_punct: String,
    pub boilerplate_patterns: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            line_end_punct_max: 0.12,
            dup_line_char_min: 0.10,
            short_line_ratio_max: 0.67,
            short_line_len: 30,
            min_doc_chars: 200,
            max_doc_chars: 1_000_000,
            blacklist_phrases: vec!["javascript".into(), "cookie policy".into()],
            terminal_punct: ".!?\"'".into(),
            boilerplate_patterns: DEFAULT_BOILERPLATE.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("line_end_punct_max", self.line_end_punct_max),
            ("dup_line_char_min", self.dup_line_char_min),
            ("short_line_ratio_max", self.short_line_ratio_max),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {v}")));
            }
        }
        if self.min_doc_chars >= self.max_doc_chars {
            return Err(Error::Config("min_doc_chars must be < max_doc_chars".into()));
        }
        BoilerplatePatterns::compile(&self.boilerplate_patterns)?;
        Ok(())
    }

    pub fn is_terminal(&self, c: char) -> bool {
        self.terminal_punct.contains(c)
    }
}

/// Rejection histogram of an L1 run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: u64,
    pub kept: u64,
    pub rejected: BTreeMap<String, u64>,
    /// Whitespace-token share removed by mappers and filters together.
    pub token_estimate_removed_fraction: f64,
}

impl FilterReport {
    fn merge(mut self, other: FilterReport) -> FilterReport {
        self.total += other.total;
        self.kept += other.kept;
        for (k, v) in other.rejected {
            *self.rejected.entry(k).or_default() += v;
        }
        self
    }
}

/// Outcome for one L0 record before promotion.
#[derive(Debug, Clone)]
pub struct DocOutcome {
    pub text: String,
    pub lang: String,
    pub lang_confidence: f64,
    pub verdict: FilterVerdict,
}

/// Runs the mapper/filter chain over one document: HTML extraction for
/// crawl payloads, then repair, line filter, language check, quality filter.
pub fn process_document(
    record: &Record,
    cfg: &FilterConfig,
    boilerplate: &BoilerplatePatterns,
    target_lang: &str,
    profiles: &[LangProfile],
) -> DocOutcome {
    let raw = if record.meta.get(CONTENT_TYPE_KEY).map(String::as_str) == Some(HTML_CONTENT_TYPE) {
        extract_text(&record.text)
    } else {
        record.text.clone()
    };
    let text = c4_line_filter(&boilerplate.repair(&raw), &cfg.blacklist_phrases);
    let (lang, lang_confidence) = detect_language(&text, profiles);
    let verdict = if lang != target_lang {
        let mut v = doc_quality_filter(&text, cfg);
        v.kept = false;
        v.reason = Some(RejectReason::Language);
        v
    } else {
        doc_quality_filter(&text, cfg)
    };
    DocOutcome {
        text,
        lang,
        lang_confidence,
        verdict,
    }
}

fn whitespace_tokens(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// Filters an L0 shard into L1 survivors. Order of `records` is preserved.
pub fn run_l1_pipeline(
    records: &[Record],
    cfg: &FilterConfig,
    target_lang: &str,
    profiles: &[LangProfile],
    ctx: &OpContext,
) -> Result<(Vec<Record>, FilterReport)> {
    cfg.validate()?;
    if let Some(bad) = records.iter().find(|r| r.tier != TierLabel::L0) {
        return Err(Error::ShardTier {
            expected: TierLabel::L0,
            found: bad.tier,
            id: bad.id.clone(),
        });
    }
    let boilerplate = BoilerplatePatterns::compile(&cfg.boilerplate_patterns)?;
    let params = serde_json::json!({ "config": cfg, "lang": target_lang });
    let stamp = ctx.stamp(OP_NAME, &params);

    let outcomes: Vec<(Option<Record>, FilterReport, u64, u64)> = records
        .par_iter()
        .map(|r| {
            let out = process_document(r, cfg, &boilerplate, target_lang, profiles);
            let before = whitespace_tokens(&r.text);
            let mut report = FilterReport {
                total: 1,
                ..Default::default()
            };
            if out.verdict.kept {
                report.kept = 1;
                let after = whitespace_tokens(&out.text);
                let mut promoted =
                    promote(r, TierLabel::L1, stamp.clone(), out.text, &[]).expect("L0 to L1 never regresses");
                promoted.lang = Some(out.lang);
                promoted.scores.insert("lang_confidence".into(), out.lang_confidence);
                promoted.meta.remove(CONTENT_TYPE_KEY);
                (Some(promoted), report, before, after)
            } else {
                let reason = out.verdict.reason.expect("rejected verdict has a reason");
                report.rejected.insert(reason.as_str().into(), 1);
                (None, report, before, 0)
            }
        })
        .collect();

    let mut kept = Vec::new();
    let mut report = FilterReport::default();
    let (mut before, mut after) = (0u64, 0u64);
    for (rec, r, b, a) in outcomes {
        kept.extend(rec);
        report = report.merge(r);
        before += b;
        after += a;
    }
    report.token_estimate_removed_fraction = if before == 0 {
        0.0
    } else {
        before.saturating_sub(after) as f64 / before as f64
    };
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, Domain, SourceMeta};

    pub(crate) fn prose(seed: usize) -> String {
        let sentences = [
            "The committee reviewed the annual report and approved the new budget for the public library.",
            "Students in the chemistry class measured the boiling point of water at several different altitudes.",
            "Historians believe the bridge was built during the reign of a king who valued trade above all else.",
            "A careful gardener waters the tomatoes early in the morning, before the heat of the day arrives.",
            "The museum opened a new exhibit about the history of navigation and the instruments sailors used.",
            "Researchers found that regular exercise improves memory and helps people sleep better at night.",
        ];
        (0..8)
            .map(|i| sentences[(seed + i * 5) % sentences.len()].to_string() + &format!(" Note {seed}-{i} was added."))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn l0(text: &str, i: usize) -> Record {
        new_record(text, SourceMeta::new(format!("https://e.com/{i}"), "CC-1", Domain::WebEn))
    }

    #[test]
    fn clean_prose_all_kept() {
        let recs: Vec<_> = (0..6).map(|i| l0(&prose(i), i)).collect();
        let (kept, report) = run_l1_pipeline(&recs, &FilterConfig::default(), "en", &builtin_profiles(), &OpContext::fixed(0)).unwrap();
        assert_eq!(kept.len(), 6, "{report:?}");
        assert!(report.rejected.is_empty());
        for (k, r) in kept.iter().zip(&recs) {
            assert_eq!(k.tier, TierLabel::L1);
            assert_eq!(k.parents, vec![r.id.clone()]);
            assert_eq!(k.lang.as_deref(), Some("en"));
        }
    }

    #[test]
    fn tiny_docs_all_too_short() {
        let recs: Vec<_> = (0..5).map(|i| l0(&format!("tiny doc{i}"), i)).collect();
        let (kept, report) = run_l1_pipeline(&recs, &FilterConfig::default(), "en", &builtin_profiles(), &OpContext::fixed(0)).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.rejected, BTreeMap::from([("too_short".to_string(), 5)]));
    }

    #[test]
    fn wrong_language_rejected() {
        let zh = include_str!("../../assets/lang/zh.txt");
        let recs = vec![l0(zh, 0)];
        let (kept, report) = run_l1_pipeline(&recs, &FilterConfig::default(), "en", &builtin_profiles(), &OpContext::fixed(0)).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.rejected["language"], 1);
    }

    #[test]
    fn tier_mismatch() {
        let r = l0(&prose(0), 0);
        let l1 = promote(&r, TierLabel::L1, OpContext::fixed(0).stamp("x", "y"), r.text.clone(), &[]).unwrap();
        assert!(run_l1_pipeline(&[l1], &FilterConfig::default(), "en", &builtin_profiles(), &OpContext::fixed(0)).is_err());
    }

    #[test]
    fn html_payloads_are_extracted() {
        let html = format!("<html><script>var a;</script><p>{}</p></html>", prose(1).replace('\n', "</p><p>"));
        let mut r = l0(&html, 0);
        r.meta.insert(CONTENT_TYPE_KEY.into(), HTML_CONTENT_TYPE.into());
        let (kept, _) = run_l1_pipeline(&[r], &FilterConfig::default(), "en", &builtin_profiles(), &OpContext::fixed(0)).unwrap();
        assert_eq!(kept[0].text, prose(1));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = FilterConfig {
            line_end_punct_max: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = FilterConfig {
            min_doc_chars: 10,
            max_doc_chars: 10,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<FilterConfig>(r#"{"bogus": 1}"#).is_err());
        let c: FilterConfig = serde_json::from_str(r#"{"min_doc_chars": 50}"#).unwrap();
        assert_eq!(c.min_doc_chars, 50);
        assert_eq!(c.line_end_punct_max, 0.12);
    }
}

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::latex::{latex_balance, Balance};
use super::plan::TaskKind;
use crate::dedup::{exact_jaccard, shingle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    LatexUnbalanced,
    Truncated,
    TooShort,
    LowDensity,
    SeedDuplicate,
    SemanticDrift,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::LatexUnbalanced => "latex_unbalanced",
            RejectReason::Truncated => "truncated",
            RejectReason::TooShort => "too_short",
            RejectReason::LowDensity => "low_density",
            RejectReason::SeedDuplicate => "seed_duplicate",
            RejectReason::SemanticDrift => "semantic_drift",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
}

impl ValidationVerdict {
    fn from_reasons(reasons: Vec<RejectReason>) -> Self {
        ValidationVerdict {
            accepted: reasons.is_empty(),
            reasons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub min_chars: usize,
    pub min_alnum_fraction: f64,
    pub max_seed_jaccard: f64,
    pub min_content_overlap: f64,
    pub shingle_size: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            min_chars: 20,
            min_alnum_fraction: 0.5,
            max_seed_jaccard: 0.8,
            min_content_overlap: 0.6,
            shingle_size: 5,
        }
    }
}

impl ValidateConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.min_alnum_fraction) || !unit(self.max_seed_jaccard) || !unit(self.min_content_overlap) || self.shingle_size == 0 {
            return Err(Error::Config("validator fractions must lie in [0,1] and shingle_size >= 1".into()));
        }
        Ok(())
    }
}

const TERMINAL: &[char] = &['.', '!', '?', '。', '！', '？'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '”', '’', '»'];

/// Ends on sentence punctuation (possibly inside closing quotes) or on a
/// closing math delimiter.
pub fn ends_cleanly(text: &str) -> bool {
    let t = text.trim_end();
    let body = t.trim_end_matches(CLOSERS);
    if body.ends_with(TERMINAL) {
        return true;
    }
    if t.ends_with('$') || t.ends_with("\\)") || t.ends_with("\\]") {
        return true;
    }
    if let Some(open) = t.rfind("\\end{") {
        let tail = &t[open + 5..];
        return tail.ends_with('}') && !tail[..tail.len() - 1].contains('}');
    }
    false
}

pub fn alnum_fraction(text: &str) -> f64 {
    let (mut total, mut alnum) = (0usize, 0usize);
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if c.is_alphanumeric() {
            alnum += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        alnum as f64 / total as f64
    }
}

/// Word `n`-gram Jaccard; texts too short for any shingle fall back to
/// whitespace-normalized equality.
pub fn seed_similarity(candidate: &str, seed: &str, n: usize) -> f64 {
    let (a, b) = (shingle(candidate, n), shingle(seed, n));
    if a.is_empty() && b.is_empty() {
        let norm = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>();
        return if norm(candidate) == norm(seed) { 1.0 } else { 0.0 };
    }
    exact_jaccard(&a, &b)
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because", "been", "but", "by", "can",
    "could", "did", "do", "does", "each", "for", "from", "had", "has", "have", "he", "her", "here", "his", "how", "if", "in",
    "into", "is", "it", "its", "just", "may", "more", "most", "no", "not", "of", "on", "one", "or", "other", "our", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "to", "too", "two", "up", "us", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "why",
    "will", "with", "would", "you", "your",
];

pub fn content_words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 3 && !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Fraction of the seed's distinct content words found in the candidate.
/// A seed without content words counts as fully covered.
pub fn content_overlap(candidate: &str, seed: &str) -> f64 {
    let s = content_words(seed);
    if s.is_empty() {
        return 1.0;
    }
    let c = content_words(candidate);
    s.intersection(&c).count() as f64 / s.len() as f64
}

/// Runs every check and lists all failures, in [`RejectReason`] order.
/// `seed_text` is the excerpt the generator saw.
pub fn validate_output(candidate: &str, seed_text: &str, kind: TaskKind, truncated: bool, cfg: &ValidateConfig) -> ValidationVerdict {
    let mut reasons = Vec::new();
    let balance = latex_balance(candidate);
    if balance != Balance::Balanced {
        reasons.push(RejectReason::LatexUnbalanced);
    }
    // an unclosed span is already reported as a LaTeX fault
    if truncated || (balance != Balance::Unclosed && !ends_cleanly(candidate)) {
        reasons.push(RejectReason::Truncated);
    }
    if candidate.chars().count() < cfg.min_chars {
        reasons.push(RejectReason::TooShort);
    }
    if alnum_fraction(candidate) < cfg.min_alnum_fraction {
        reasons.push(RejectReason::LowDensity);
    }
    if kind.is_synthesis() && seed_similarity(candidate, seed_text, cfg.shingle_size) >= cfg.max_seed_jaccard {
        reasons.push(RejectReason::SeedDuplicate);
    }
    if kind == TaskKind::Edit && content_overlap(candidate, seed_text) < cfg.min_content_overlap {
        reasons.push(RejectReason::SemanticDrift);
    }
    ValidationVerdict::from_reasons(reasons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RejectReason::*;

    fn loose() -> ValidateConfig {
        ValidateConfig {
            min_chars: 1,
            ..Default::default()
        }
    }

    fn reasons(c: &str, seed: &str, kind: TaskKind) -> Vec<RejectReason> {
        validate_output(c, seed, kind, false, &loose()).reasons
    }

    #[test]
    fn spec_examples() {
        let seed = "An unrelated seed passage about geometry and circles.";
        assert!(validate_output("$x+1$ done.", seed, TaskKind::QaStratified, false, &loose()).accepted);
        assert_eq!(reasons("$x+1", seed, TaskKind::QaStratified), vec![LatexUnbalanced]);
        assert_eq!(reasons("\\begin{align}x\\end{aligned}", seed, TaskKind::QaStratified), vec![LatexUnbalanced]);
    }

    #[test]
    fn individual_checks() {
        let seed = "Circles have a radius and a diameter that is twice the radius.";
        assert_eq!(reasons("The sum is eleven and", seed, TaskKind::Dialogue), vec![Truncated]);
        assert_eq!(reasons("See $$a=b$$", seed, TaskKind::Dialogue), Vec::<RejectReason>::new());
        assert_eq!(reasons("See \\begin{align}a\\end{align}", seed, TaskKind::Dialogue), Vec::<RejectReason>::new());
        assert_eq!(reasons("(\"$..$\" -- !!)", seed, TaskKind::Dialogue), vec![LowDensity]);
        assert_eq!(reasons(seed, seed, TaskKind::Persona), vec![SeedDuplicate]);
        assert_eq!(reasons(seed, seed, TaskKind::Edit), Vec::<RejectReason>::new());
        assert_eq!(reasons("Bananas are yellow fruit.", seed, TaskKind::Edit), vec![SemanticDrift]);
        let strict = ValidateConfig::default();
        assert_eq!(validate_output("Short.", seed, TaskKind::Persona, false, &strict).reasons, vec![TooShort]);
        assert_eq!(validate_output("Fine text.", seed, TaskKind::Persona, true, &loose()).reasons, vec![Truncated]);
    }

    #[test]
    fn overlap_and_similarity() {
        assert_eq!(content_overlap("", "the of and"), 1.0);
        assert!((content_overlap("radius circle", "circle radius diameter") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(seed_similarity("a b", "A  b", 5), 1.0);
        assert_eq!(seed_similarity("a b", "a c", 5), 0.0);
        assert!(ends_cleanly("He said \"stop.\""));
        assert!(!ends_cleanly("x \\end{align"));
    }
}

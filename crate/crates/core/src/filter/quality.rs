use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::FilterConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    PunctRatio,
    DupLines,
    ShortLines,
    TooShort,
    TooLong,
    Language,
    NoTerminalPunct,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::PunctRatio => "punct_ratio",
            RejectReason::DupLines => "dup_lines",
            RejectReason::ShortLines => "short_lines",
            RejectReason::TooShort => "too_short",
            RejectReason::TooLong => "too_long",
            RejectReason::Language => "language",
            RejectReason::NoTerminalPunct => "no_terminal_punct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    pub reason: Option<RejectReason>,
    /// Always has `punct_ratio`, `dup_lines`, `short_lines` and `chars`.
    pub metrics: BTreeMap<String, f64>,
}

/// Document-level quality checks, evaluated in a fixed order (length bounds,
/// then punctuation, duplicate-line and short-line ratios); the first failure
/// is the reported reason. Ratios are over trimmed nonempty lines and are 0
/// for a document without any.
pub fn doc_quality_filter(text: &str, cfg: &FilterConfig) -> FilterVerdict {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let n = lines.len();

    let ending_punct = lines
        .iter()
        .filter(|l| l.chars().next_back().is_some_and(|c| cfg.is_terminal(c)))
        .count();
    let short = lines
        .iter()
        .filter(|l| l.chars().count() < cfg.short_line_len)
        .count();

    let mut seen: HashSet<&str> = HashSet::with_capacity(n);
    let mut total_chars = 0usize;
    let mut dup_chars = 0usize;
    for l in &lines {
        let len = l.chars().count();
        total_chars += len;
        if !seen.insert(l) {
            dup_chars += len;
        }
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let punct_ratio = ratio(ending_punct, n);
    let dup_ratio = ratio(dup_chars, total_chars);
    let short_ratio = ratio(short, n);
    let chars = text.chars().count();

    let metrics = BTreeMap::from([
        ("punct_ratio".to_string(), punct_ratio),
        ("dup_lines".to_string(), dup_ratio),
        ("short_lines".to_string(), short_ratio),
        ("chars".to_string(), chars as f64),
    ]);

    let reason = if chars < cfg.min_doc_chars {
        Some(RejectReason::TooShort)
    } else if chars > cfg.max_doc_chars {
        Some(RejectReason::TooLong)
    } else if punct_ratio <= cfg.line_end_punct_max {
        Some(RejectReason::PunctRatio)
    } else if dup_ratio >= cfg.dup_line_char_min {
        Some(RejectReason::DupLines)
    } else if short_ratio >= cfg.short_line_ratio_max {
        Some(RejectReason::ShortLines)
    } else if chars < cfg.min_doc_chars && !text.chars().any(|c| cfg.is_terminal(c)) {
        // never reached: too_short fires first for every such document
        Some(RejectReason::NoTerminalPunct)
    } else {
        None
    };
    FilterVerdict {
        kept: reason.is_none(),
        reason,
        metrics,
    }
}

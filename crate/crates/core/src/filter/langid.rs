use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const UNDETERMINED: &str = "und";

/// L1-normalized character-trigram frequencies for one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangProfile {
    pub lang: String,
    pub trigram_freqs: BTreeMap<String, f64>,
}

/// Lowercases, maps every non-alphabetic char to a space, collapses spaces
/// and pads both ends with one space.
fn normalize(text: &str) -> Vec<char> {
    let mut out = vec![' '];
    for c in text.chars() {
        if c.is_alphabetic() {
            out.extend(c.to_lowercase());
        } else if out.last() != Some(&' ') {
            out.push(' ');
        }
    }
    if out.last() != Some(&' ') {
        out.push(' ');
    }
    out
}

fn trigram_counts(text: &str) -> BTreeMap<String, f64> {
    let chars = normalize(text);
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for w in chars.windows(3) {
        if w.iter().all(|c| *c == ' ') {
            continue;
        }
        *counts.entry(w.iter().collect()).or_default() += 1.0;
    }
    counts
}

impl LangProfile {
    pub fn from_text(lang: &str, text: &str) -> Self {
        let counts = trigram_counts(text);
        let total: f64 = counts.values().sum();
        let trigram_freqs = counts
            .into_iter()
            .map(|(k, v)| (k, if total > 0.0 { v / total } else { 0.0 }))
            .collect();
        LangProfile {
            lang: lang.to_string(),
            trigram_freqs,
        }
    }

    fn cosine(&self, other: &BTreeMap<String, f64>) -> f64 {
        let self_norm: f64 = self.trigram_freqs.values().map(|v| v * v).sum::<f64>().sqrt();
        let other_norm: f64 = other.values().map(|v| v * v).sum::<f64>().sqrt();
        if self_norm == 0.0 || other_norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = other
            .iter()
            .filter_map(|(k, v)| self.trigram_freqs.get(k).map(|p| p * v))
            .sum();
        (dot / (self_norm * other_norm)).clamp(0.0, 1.0)
    }
}

/// Profiles built from the bundled reference texts (en, zh, de, fr).
pub fn builtin_profiles() -> Vec<LangProfile> {
    [
        ("de", include_str!("../../assets/lang/de.txt")),
        ("en", include_str!("../../assets/lang/en.txt")),
        ("fr", include_str!("../../assets/lang/fr.txt")),
        ("zh", include_str!("../../assets/lang/zh.txt")),
    ]
    .iter()
    .map(|(l, t)| LangProfile::from_text(l, t))
    .collect()
}

/// Best profile by cosine similarity of trigram frequency vectors; ties go
/// to the lexicographically smaller code. Texts under 3 chars, or with no
/// trigram, are `("und", 0.0)`.
pub fn detect_language(text: &str, profiles: &[LangProfile]) -> (String, f64) {
    if text.chars().count() < 3 {
        return (UNDETERMINED.to_string(), 0.0);
    }
    let counts = trigram_counts(text);
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return (UNDETERMINED.to_string(), 0.0);
    }
    let freqs: BTreeMap<String, f64> = counts.into_iter().map(|(k, v)| (k, v / total)).collect();
    let mut best: Option<(&str, f64)> = None;
    for p in profiles {
        let sim = p.cosine(&freqs);
        best = match best {
            Some((lang, s)) if s > sim || (s == sim && lang <= p.lang.as_str()) => Some((lang, s)),
            _ => Some((p.lang.as_str(), sim)),
        };
    }
    match best {
        Some((lang, sim)) => (lang.to_string(), sim),
        None => (UNDETERMINED.to_string(), 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_sums_to_one() {
        for p in builtin_profiles() {
            let s: f64 = p.trigram_freqs.values().sum();
            assert!((s - 1.0).abs() < 1e-9, "{} sums to {s}", p.lang);
        }
    }

    #[test]
    fn self_similarity() {
        let en = include_str!("../../assets/lang/en.txt");
        let (lang, conf) = detect_language(en, &builtin_profiles());
        assert_eq!(lang, "en");
        assert!(conf >= 0.99);
    }

    #[test]
    fn degenerate_input() {
        assert_eq!(detect_language("ab", &builtin_profiles()), ("und".to_string(), 0.0));
        assert_eq!(detect_language("123 456", &builtin_profiles()), ("und".to_string(), 0.0));
    }

    #[test]
    fn ties_break_lexicographically() {
        let a = LangProfile::from_text("xx", "hello world");
        let b = LangProfile::from_text("aa", "hello world");
        assert_eq!(detect_language("hello world", &[a, b]).0, "aa");
    }

    #[test]
    fn separates_chinese_and_german() {
        let profiles = builtin_profiles();
        assert_eq!(detect_language("我们今天去公园散步，天气很好。", &profiles).0, "zh");
        assert_eq!(
            detect_language("Die Kinder spielen heute im Garten und der Hund schläft unter dem Baum.", &profiles).0,
            "de"
        );
    }
}

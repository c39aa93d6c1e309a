use regex::Regex;

use crate::error::{Error, Result};

/// Page numbers, breadcrumbs and pagination buttons.
pub const DEFAULT_BOILERPLATE: &[&str] = &[
    r"^[0-9]{1,4}$",
    r"^Home\s*>.*$",
    r"^(?i:next page|previous page)$",
];

const ZERO_WIDTH: &[char] = &['\u{200B}', '\u{200C}', '\u{200D}', '\u{2060}', '\u{FEFF}'];

/// Compiled line patterns; a line is dropped when its trimmed form matches.
#[derive(Debug, Clone)]
pub struct BoilerplatePatterns {
    patterns: Vec<Regex>,
}

impl BoilerplatePatterns {
    pub fn compile<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        let patterns = patterns
            .iter()
            .map(|p| Regex::new(p.as_ref()).map_err(|e| Error::Config(format!("bad boilerplate pattern: {e}"))))
            .collect::<Result<_>>()?;
        Ok(BoilerplatePatterns { patterns })
    }

    pub fn default_set() -> Self {
        Self::compile(DEFAULT_BOILERPLATE).expect("default patterns compile")
    }

    pub fn none() -> Self {
        BoilerplatePatterns { patterns: Vec::new() }
    }

    fn is_boilerplate(&self, line: &str) -> bool {
        let t = line.trim();
        self.patterns.iter().any(|p| p.is_match(t))
    }

    /// Format repair: strip control and zero-width characters, drop
    /// boilerplate lines, collapse runs of 3+ newlines to 2.
    pub fn repair(&self, text: &str) -> String {
        let cleaned: String = text
            .chars()
            .filter(|&c| !(c.is_control() && c != '\n' && c != '\t') && !ZERO_WIDTH.contains(&c))
            .collect();
        let kept = drop_lines(&cleaned, |l| self.is_boilerplate(l));
        collapse_newlines(&kept)
    }
}

/// Removes each `\n`-separated segment matching `drop` along with its
/// separator; remaining segments keep their bytes and order.
fn drop_lines(text: &str, drop: impl Fn(&str) -> bool) -> String {
    let segments: Vec<&str> = text.split('\n').collect();
    let last = segments.len() - 1;
    let mut out = String::with_capacity(text.len());
    let mut first = true;
    for (i, seg) in segments.iter().enumerate() {
        // the empty tail after a final '\n' is a terminator, not a line
        let is_line = !(i == last && seg.is_empty() && last > 0);
        if is_line && drop(seg) {
            continue;
        }
        if !first {
            out.push('\n');
        }
        out.push_str(seg);
        first = false;
    }
    out
}

fn collapse_newlines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run = 0;
    for c in text.chars() {
        if c == '\n' {
            run += 1;
            if run > 2 {
                continue;
            }
        } else {
            run = 0;
        }
        out.push(c);
    }
    out
}

pub fn repair_format(text: &str) -> String {
    BoilerplatePatterns::default_set().repair(text)
}

/// Removes lines containing any blacklisted phrase, case-insensitively.
pub fn c4_line_filter<S: AsRef<str>>(text: &str, blacklist: &[S]) -> String {
    let needles: Vec<String> = blacklist
        .iter()
        .map(|p| p.as_ref().to_lowercase())
        .filter(|p| !p.is_empty())
        .collect();
    if needles.is_empty() {
        return text.to_string();
    }
    drop_lines(text, |line| {
        let lower = line.to_lowercase();
        needles.iter().any(|n| lower.contains(n.as_str()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_controls_and_zero_width() {
        assert_eq!(repair_format("a\u{0000}b\u{200B}c"), "abc");
        assert_eq!(repair_format("x\u{0085}y\tz\r\n"), "xy\tz\n");
    }

    #[test]
    fn collapses_newline_runs() {
        assert_eq!(repair_format("a\n\n\n\n\nb"), "a\n\nb");
        assert_eq!(repair_format("a\n\nb"), "a\n\nb");
    }

    #[test]
    fn drops_boilerplate_lines() {
        assert_eq!(repair_format("Intro\n3\nBody"), "Intro\nBody");
        assert_eq!(repair_format("Home > Blog > Post\nBody"), "Body");
        assert_eq!(repair_format("Body\nNext page\nPrevious Page"), "Body");
        assert_eq!(repair_format("Body\n12345\n"), "Body\n12345\n");
        assert_eq!(repair_format("Body\n7\n"), "Body\n");
    }

    #[test]
    fn line_filter_examples() {
        let bl = ["javascript", "cookie policy"];
        assert_eq!(c4_line_filter("Enable JavaScript to view\nReal content.", &bl), "Real content.");
        assert_eq!(c4_line_filter("see our cookie policy\nbody", &bl), "body");
        assert_eq!(c4_line_filter("plain text\nhere", &bl), "plain text\nhere");
        assert_eq!(c4_line_filter("a\nJAVASCRIPT\n", &bl), "a\n");
    }

    fn noisy_text() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            "\\PC{0,6}",
            Just("\n".to_string()),
            Just("\n\n\n".to_string()),
            Just("\u{200B}".to_string()),
            Just("\u{0007}".to_string()),
            Just("\r".to_string()),
            Just("42".to_string()),
            Just("Home > x".to_string()),
            Just("Next page".to_string()),
            Just("JavaScript".to_string()),
            Just("cookie policy".to_string()),
            Just(" ".to_string()),
        ];
        prop::collection::vec(piece, 0..24).prop_map(|v| v.concat())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn mappers_idempotent_and_shrinking(t in noisy_text()) {
            let once = repair_format(&t);
            prop_assert_eq!(repair_format(&once), once.clone());
            prop_assert!(once.len() <= t.len());
            let bl = ["javascript", "cookie policy"];
            let f = c4_line_filter(&t, &bl);
            prop_assert_eq!(c4_line_filter(&f, &bl), f.clone());
            prop_assert!(f.len() <= t.len());
        }
    }
}

//! Deterministic synthetic corpora for tests, benchmarks and demos.
//!
//! Every generator is a pure function of its seed. Documents carry the
//! label they were built with so tests can state expected outcomes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Domain;

const Q_SUBJECTS: &[&str] = &[
    "the theorem", "the proof", "the lemma", "this derivation", "the integral", "the derivative", "the sequence", "the matrix",
    "the polynomial", "the equation", "the hypothesis", "the experiment", "the molecule", "the orbit", "the triangle",
    "the function", "the series", "the vector", "the probability", "the algorithm",
];
const Q_VERBS: &[&str] = &[
    "shows", "explains", "predicts", "establishes", "describes", "demonstrates", "measures", "implies", "bounds", "reveals",
];
const Q_OBJECTS: &[&str] = &[
    "the limit of the sequence", "the area under the curve", "the rate of change", "the sum of the angles",
    "the energy of the system", "the rank of the matrix", "the roots of the polynomial", "the convergence of the series",
    "the expected value", "the length of the hypotenuse", "the speed of the reaction", "the symmetry of the crystal",
    "the structure of the proof", "the distribution of primes", "the stability of the orbit", "the volume of the solid",
];
const Q_CONDITIONS: &[&str] = &[
    "when the variable grows without bound", "for every positive integer", "under small perturbations",
    "if the function is continuous", "when the temperature is held constant", "for any two distinct points",
    "as the step size shrinks", "whenever the determinant is nonzero", "provided the series converges",
    "in a closed interval", "for each prime factor", "after one full rotation",
];
const Q_MATH: &[&str] = &[
    "$x^2 + y^2 = r^2$", "$a^2 + b^2 = c^2$", "$\\frac{d}{dx} x^n = n x^{n-1}$", "$\\sum_{k=1}^{n} k = \\frac{n(n+1)}{2}$",
    "$e^{i\\pi} + 1 = 0$", "$\\int_0^1 x\\,dx = \\frac{1}{2}$", "$p \\mid ab$", "$\\lim_{n\\to\\infty} (1 + 1/n)^n = e$",
];

const S_OPENERS: &[&str] = &[
    "Buy cheap watches today", "Order discount sneakers now", "Grab the best deals online", "Shop our huge clearance sale",
    "Claim your free gift card", "Get premium handbags at outlet prices", "Save big on designer sunglasses",
    "Download the coupon app", "Win a brand new phone", "Upgrade your wardrobe for less",
];
const S_TAILS: &[&str] = &[
    "and enjoy free shipping on every order", "while the limited offer lasts", "with our lowest price guarantee",
    "before the flash sale ends tonight", "and click here to unlock extra savings", "with exclusive members only discounts",
    "and subscribe for daily promo codes", "because prices drop every single hour", "from trusted sellers near you",
    "and pay later with no fees",
];

const SHORT_NOUNS: &[&str] = &["cat", "book", "tree", "road", "song", "door", "lamp", "wall"];

const DE_LINES: &[&str] = &[
    "Die Stadt liegt an einem breiten Fluss und hat eine sehr alte Kirche im Zentrum.",
    "Im Sommer fahren viele Familien mit dem Fahrrad durch die grünen Wälder der Umgebung.",
    "Der Bäcker öffnet seinen Laden jeden Morgen schon um fünf Uhr für die ersten Kunden.",
    "Unsere Nachbarn sprechen oft über das Wetter und die Preise auf dem Wochenmarkt.",
    "Das Museum zeigt Bilder aus dem neunzehnten Jahrhundert und alte Karten der Region.",
    "Nach der Arbeit treffen sich die Kollegen gern in einem kleinen Gasthaus am Marktplatz.",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("nonempty bank")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One well-formed line of technical prose, longer than 30 chars.
pub fn quality_sentence(rng: &mut ChaCha8Rng, with_math: bool) -> String {
    let mut s = format!(
        "{} {} {} {}",
        capitalize(pick(rng, Q_SUBJECTS)),
        pick(rng, Q_VERBS),
        pick(rng, Q_OBJECTS),
        pick(rng, Q_CONDITIONS)
    );
    if with_math {
        s.push_str(", as in ");
        s.push_str(pick(rng, Q_MATH));
    }
    s.push_str(&format!(" in case {}.", rng.gen_range(1..100_000)));
    s
}

pub fn spam_sentence(rng: &mut ChaCha8Rng) -> String {
    format!("{} {} with code {}.", pick(rng, S_OPENERS), pick(rng, S_TAILS), rng.gen_range(1000..1_000_000))
}

pub fn quality_doc(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(6..11);
    (0..n).map(|i| quality_sentence(rng, i % 3 == 1)).collect::<Vec<_>>().join("\n")
}

pub fn spam_doc(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(6..11);
    (0..n).map(|_| spam_sentence(rng)).collect::<Vec<_>>().join("\n")
}

/// Positive and negative seed texts for training a quality classifier.
pub fn classifier_seeds(seed: u64, n: usize) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e75);
    let pos = (0..n).map(|_| quality_doc(&mut rng)).collect();
    let neg = (0..n).map(|_| spam_doc(&mut rng)).collect();
    (pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "label")]
pub enum Label {
    Quality,
    Spam,
    /// A lightly edited copy of document `of`, same snapshot.
    NearDup { of: usize },
    /// Same text as `of` from a mirror url; `same_snapshot` says whether it
    /// shares the original's snapshot.
    ExactDup { of: usize, same_snapshot: bool },
    TooShort,
    PunctRatio,
    DupLines,
    ShortLines,
    Foreign,
}

/// Where a fixture document is expected to end up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    /// Survives L1 filtering (`None` reason means kept).
    pub l1_reason: Option<&'static str>,
    pub survives_dedup: bool,
    pub reaches_l2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDoc {
    pub url: String,
    pub snapshot: String,
    pub domain: Domain,
    pub text: String,
    #[serde(flatten)]
    pub label: Label,
}

pub const SNAPSHOTS: [&str; 2] = ["CC-2024-10", "CC-2024-22"];

fn near_copy(rng: &mut ChaCha8Rng, text: &str) -> String {
    // swap one word of a long doc; keeps word 5-gram Jaccard well above 0.75
    let mut words: Vec<&str> = text.split(' ').collect();
    let i = rng.gen_range(1..words.len() - 1);
    let replacement = if words[i].ends_with('.') || words[i].contains('\n') || words[i].contains('$') {
        return text.replacen("the ", "this ", 1);
    } else {
        "notably"
    };
    words[i] = replacement;
    words.join(" ")
}

/// The 200-document pipeline fixture.
///
/// 70 quality, 50 spam, 20 near duplicates, 10 exact duplicates (5 in the
/// same snapshot), and 10 each of too short, punctuation-poor, duplicated
/// lines, short lines and German text.
pub fn pipeline_corpus(seed: u64) -> Vec<FixtureDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(200);
    let push = |docs: &mut Vec<FixtureDoc>, snapshot: &str, domain: Domain, text: String, label: Label| {
        let i = docs.len();
        docs.push(FixtureDoc {
            url: format!("https://fixture.example/{i:03}"),
            snapshot: snapshot.to_string(),
            domain,
            text,
            label,
        });
    };
    for i in 0..70 {
        let mut text = quality_doc(&mut rng);
        if i % 10 == 3 {
            text.push_str("\nPlease enable JavaScript to view the comments on this page.");
        }
        let domain = if i % 2 == 0 { Domain::Math } else { Domain::WebEn };
        push(&mut docs, SNAPSHOTS[i % 2], domain, text, Label::Quality);
    }
    for i in 0..50 {
        let text = spam_doc(&mut rng);
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, text, Label::Spam);
    }
    for k in 0..20 {
        let of = k * 3;
        let (snap, domain, text) = (docs[of].snapshot.clone(), docs[of].domain, near_copy(&mut rng, &docs[of].text.clone()));
        push(&mut docs, &snap, domain, text, Label::NearDup { of });
    }
    for k in 0..10 {
        let of = if k % 2 == 0 { 1 + k * 4 } else { 70 + k * 3 };
        let same = k < 5;
        let snap = if same { docs[of].snapshot.clone() } else { other_snapshot(&docs[of].snapshot) };
        let (domain, text) = (docs[of].domain, docs[of].text.clone());
        push(&mut docs, &snap, domain, text, Label::ExactDup { of, same_snapshot: same });
    }
    for i in 0..10 {
        let text = quality_sentence(&mut rng, false);
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, text, Label::TooShort);
    }
    for i in 0..10 {
        let text = (0..6)
            .map(|_| quality_sentence(&mut rng, false).trim_end_matches('.').to_string() + " and more")
            .collect::<Vec<_>>()
            .join("\n");
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, text, Label::PunctRatio);
    }
    for i in 0..10 {
        let lines: Vec<String> = (0..5).map(|_| quality_sentence(&mut rng, false)).collect();
        let mut all = lines.clone();
        all.extend(lines[..3].iter().cloned());
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, all.join("\n"), Label::DupLines);
    }
    for i in 0..10 {
        let mut lines: Vec<String> = (0..12).map(|j| format!("The {} {j} is here.", SHORT_NOUNS[(i + j) % 8])).collect();
        lines.push(quality_sentence(&mut rng, false));
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, lines.join("\n"), Label::ShortLines);
    }
    for i in 0..10 {
        let mut lines: Vec<&str> = DE_LINES.to_vec();
        lines.rotate_left(i % DE_LINES.len());
        let text = lines.join("\n") + &format!("\nDas Dokument hat die Nummer {i} und endet hier.");
        push(&mut docs, SNAPSHOTS[i % 2], Domain::WebEn, text, Label::Foreign);
    }
    docs
}

fn other_snapshot(s: &str) -> String {
    if s == SNAPSHOTS[0] { SNAPSHOTS[1] } else { SNAPSHOTS[0] }.to_string()
}

/// The hand-assigned fate of each label under the default configuration
/// (English target, per-snapshot dedup, quality classifier at 0.5).
pub fn expected(docs: &[FixtureDoc], i: usize) -> Expected {
    let base = |j: usize| match docs[j].label {
        Label::Quality => true,
        Label::Spam => false,
        _ => unreachable!("duplicates point at quality or spam documents"),
    };
    let kept = |reaches_l2| Expected {
        l1_reason: None,
        survives_dedup: true,
        reaches_l2,
    };
    let rejected = |r: &'static str| Expected {
        l1_reason: Some(r),
        survives_dedup: false,
        reaches_l2: false,
    };
    match docs[i].label {
        Label::Quality => kept(true),
        Label::Spam => kept(false),
        Label::NearDup { .. } => Expected {
            survives_dedup: false,
            ..kept(false)
        },
        Label::ExactDup { of, same_snapshot } => Expected {
            survives_dedup: !same_snapshot,
            reaches_l2: !same_snapshot && base(of),
            ..kept(false)
        },
        Label::TooShort => rejected("too_short"),
        Label::PunctRatio => rejected("punct_ratio"),
        Label::DupLines => rejected("dup_lines"),
        Label::ShortLines => rejected("short_lines"),
        Label::Foreign => rejected("language"),
    }
}

/// Lines in the ingest JSONL format.
pub fn to_jsonl(docs: &[FixtureDoc]) -> String {
    docs.iter()
        .map(|d| {
            serde_json::json!({ "url": d.url, "snapshot": d.snapshot, "domain": d.domain, "text": d.text }).to_string() + "\n"
        })
        .collect()
}

/// Random-token documents for similarity tests: `n_base` originals of
/// `len` tokens, then `n_variants` copies of random originals with a random
/// fraction (up to `max_edit`) of positions replaced.
pub fn token_corpus(seed: u64, n_base: usize, n_variants: usize, len: usize, max_edit: f64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| format!("t{}", rng.gen_range(0..50_000u32));
    let mut docs: Vec<Vec<String>> = (0..n_base).map(|_| (0..len).map(|_| word(&mut rng)).collect()).collect();
    for _ in 0..n_variants {
        let mut d = docs[rng.gen_range(0..n_base)].clone();
        let edits = (rng.gen::<f64>() * max_edit * len as f64) as usize;
        for _ in 0..edits {
            let p = rng.gen_range(0..len);
            d[p] = word(&mut rng);
        }
        docs.push(d);
    }
    docs.into_iter().map(|d| d.join(" ")).collect()
}

/// Line-mix documents whose filter ratios spread across the thresholds.
/// Each document draws its lines from one of five weightings over
/// good / unterminated / tiny / repeated / spam / blank lines.
pub fn filter_corpus(seed: u64, n: usize) -> Vec<String> {
    const PROFILES: [[f64; 6]; 5] = [
        [0.45, 0.15, 0.15, 0.10, 0.07, 0.08],
        [0.08, 0.88, 0.0, 0.0, 0.04, 0.0],
        [0.25, 0.0, 0.75, 0.0, 0.0, 0.0],
        [0.75, 0.0, 0.0, 0.25, 0.0, 0.0],
        [0.80, 0.05, 0.10, 0.0, 0.0, 0.05],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let weights = PROFILES[i % PROFILES.len()];
            let lines = rng.gen_range(1..16);
            let mut out: Vec<String> = Vec::new();
            for _ in 0..lines {
                let mut roll: f64 = rng.gen();
                let mut kind = 0;
                while kind < 5 && roll >= weights[kind] {
                    roll -= weights[kind];
                    kind += 1;
                }
                let line = match kind {
                    0 => quality_sentence(&mut rng, false),
                    1 => quality_sentence(&mut rng, false).trim_end_matches('.').to_string(),
                    2 => format!("Tiny line {}.", rng.gen_range(0..99)),
                    3 if !out.is_empty() => out[rng.gen_range(0..out.len())].clone(),
                    3 => quality_sentence(&mut rng, false),
                    4 => format!("  {}  ", spam_sentence(&mut rng)),
                    _ => String::new(),
                };
                out.push(line);
            }
            out.join("\n")
        })
        .collect()
}

/// Labelled documents whose classes use disjoint content vocabularies
/// over a shared filler vocabulary, so hashed word features separate them.
pub fn separable_corpus(seed: u64, n_per_class: usize) -> Vec<(String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let positive = i % 2 == 0;
        let prefix = if positive { "lumen" } else { "murk" };
        let len = rng.gen_range(25..60);
        let words: Vec<String> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    format!("{prefix}{}", rng.gen_range(0..200))
                } else {
                    format!("filler{}", rng.gen_range(0..300))
                }
            })
            .collect();
        out.push((words.join(" "), positive));
    }
    out
}

/// Seed passages for refinement: technical prose with inline math.
pub fn refine_seeds(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e71_0e5e);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(3..6);
            (0..k).map(|i| quality_sentence(&mut rng, i % 2 == 0)).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_corpus_shape() {
        let docs = pipeline_corpus(7);
        assert_eq!(docs.len(), 200);
        assert_eq!(docs, pipeline_corpus(7));
        let count = |f: fn(&Label) -> bool| docs.iter().filter(|d| f(&d.label)).count();
        assert_eq!(count(|l| *l == Label::Quality), 70);
        assert_eq!(count(|l| matches!(l, Label::NearDup { .. })), 20);
        assert_eq!(count(|l| matches!(l, Label::ExactDup { .. })), 10);
        for (i, d) in docs.iter().enumerate() {
            if let Label::NearDup { of } | Label::ExactDup { of, .. } = d.label {
                assert!(matches!(docs[of].label, Label::Quality | Label::Spam), "{i}");
            }
        }
        let urls: std::collections::HashSet<_> = docs.iter().map(|d| &d.url).collect();
        assert_eq!(urls.len(), 200);
    }

    #[test]
    fn token_corpus_is_deterministic() {
        assert_eq!(token_corpus(1, 5, 5, 20, 0.5), token_corpus(1, 5, 5, 20, 0.5));
        assert_eq!(token_corpus(1, 5, 5, 20, 0.5).len(), 10);
    }
}

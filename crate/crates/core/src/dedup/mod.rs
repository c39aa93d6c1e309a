//! Exact and near-duplicate removal.
//!
//! Near-duplicates use word 5-gram shingles, 112-slot MinHash signatures and
//! banded LSH (14 bands of 8 rows). Candidates are verified by estimated (or,
//! optionally, exact) Jaccard similarity and collapsed by connected
//! components; the earliest record of each component survives.

mod exact;
mod lsh;
mod minhash;
mod near;

pub use exact::{exact_dedup, normalize_for_exact, ExactDedupOutput};
pub use lsh::{lsh_candidates, LshIndex};
pub use minhash::{estimate_jaccard, exact_jaccard, minhash_signature, shingle, MinHashSignature, MinHasher, ShingleSet};
pub use near::{dedup_near, DedupReport, DupLink, NearDedupConfig, NearDedupOutput, Scope, Verification};

pub const DEFAULT_NGRAM: usize = 5;
pub const DEFAULT_NUM_PERM: usize = 112;
pub const DEFAULT_BANDS: usize = 14;
pub const DEFAULT_ROWS: usize = 8;
pub const DEFAULT_THRESHOLD: f64 = 0.75;

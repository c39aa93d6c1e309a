//! Stable hashing helpers shared by ids, checksums and operator stamps.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Incremental builder over a length-prefixed field encoding.
#[derive(Default)]
pub struct FieldHasher {
    inner: Sha256,
}

impl FieldHasher {
    pub fn new(domain_tag: &str) -> Self {
        let mut h = FieldHasher::default();
        h.field(domain_tag.as_bytes());
        h
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn count(&mut self, n: u64) -> &mut Self {
        self.inner.update(n.to_le_bytes());
        self
    }

    /// First 128 bits as 32 lowercase hex chars.
    pub fn finish_id(self) -> String {
        hex(&self.inner.finalize()[..16])
    }

    /// First 64 bits as 16 lowercase hex chars.
    pub fn finish_u64_hex(self) -> String {
        hex(&self.inner.finalize()[..8])
    }
}

pub fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// 64-bit hex digest of a serializable configuration (canonical JSON).
pub fn params_hash<T: Serialize + ?Sized>(params: &T) -> String {
    let value = serde_json::to_value(params).expect("config serializes to json");
    let mut h = FieldHasher::new("udt:params");
    h.field(value.to_string().as_bytes());
    h.finish_u64_hex()
}

/// SplitMix64 finalizer; a bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn hash_str(s: &str, seed: u64) -> u64 {
    xxhash_rust::xxh3::xxh3_64_with_seed(s.as_bytes(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_prefix_separates_fields() {
        let mut a = FieldHasher::new("t");
        a.field(b"ab").field(b"c");
        let mut b = FieldHasher::new("t");
        b.field(b"a").field(b"bc");
        assert_ne!(a.finish_id(), b.finish_id());
    }

    #[test]
    fn params_hash_is_stable() {
        let p = serde_json::json!({"a": 1, "b": [1, 2]});
        assert_eq!(params_hash(&p), params_hash(&p));
        assert_eq!(params_hash(&p).len(), 16);
    }
}

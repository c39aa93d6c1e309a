//! L4 organization: chunking, BM25 retrieval and fact verification.

mod chunk;
mod facts;
mod index;

pub use chunk::{chunk_document, chunks_to_records, read_chunks, write_chunks, Chunk, CHUNK_OP, DEFAULT_MAX_CHUNK_CHARS};
pub use facts::{normalize_term, verify_fact, FactRecord, FactStatus, FactStore, TrustedStore};
pub use index::{build_index, tokenize, TermIndex, BM25_B, BM25_K1, INDEX_MAGIC, INDEX_VERSION};

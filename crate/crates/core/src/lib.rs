//! Tiered pretraining-corpus management.
//!
//! Records move from raw archival (L0) through heuristic cleaning (L1),
//! model-driven selection (L2), refinement and synthesis (L3) to organized,
//! verified knowledge (L4). Every derived record links to its parents and
//! carries the stamps of the operators that produced it.

pub mod corpus;
pub mod dedup;
pub mod error;
pub mod filter;
pub mod fixture;
pub mod hashing;
pub mod ingest;
pub mod organize;
pub mod pipeline;
pub mod refine;
pub mod schedule;
pub mod select;

pub use error::{Error, Result};

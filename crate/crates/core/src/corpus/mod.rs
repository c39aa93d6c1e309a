//! Record, shard and lineage model shared by every pipeline stage.

mod lineage;
mod record;
mod shard;

pub use lineage::{trace_lineage, Lineage, LineageNode, RecordStore};
pub use record::{new_record, new_record_bytes, now_secs, promote, Domain, OpContext, OpStamp, Record, SourceMeta, TierLabel};
pub use shard::{
    list_shards, manifest_path, read_dir, read_shard, write_atomic, write_dir, write_shard, DirContents,
    LineError, ShardContents, ShardManifest, ShardReader, EMPTY_CHECKSUM_INPUT,
};

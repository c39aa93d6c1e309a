use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{Record, TierLabel};
use crate::error::{Error, Result};
use crate::hashing::FieldHasher;

/// Preimage tag of the checksum of a shard with no records.
pub const EMPTY_CHECKSUM_INPUT: &str = "udt:shard";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub path: String,
    pub tier: TierLabel,
    pub record_count: u64,
    pub byte_count: u64,
    pub checksum: String,
}

impl ShardManifest {
    pub fn checksum_of<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
        let mut h = FieldHasher::new(EMPTY_CHECKSUM_INPUT);
        for id in ids {
            h.field(id.as_bytes());
        }
        h.finish_u64_hex()
    }
}

/// A malformed shard line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ShardContents {
    pub records: Vec<Record>,
    pub errors: Vec<LineError>,
}

pub fn manifest_path(shard: &Path) -> PathBuf {
    let mut name = shard.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".tmp");
    PathBuf::from(name)
}

pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let tmp = tmp_path(path);
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(|e| Error::io(&tmp, e))?;
    let file = w.into_inner().map_err(|e| Error::io(&tmp, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `records` as JSONL at `path` and its manifest alongside. Both files
/// are written to a temporary name first and renamed into place, shard first.
pub fn write_shard<'a, I>(path: &Path, tier: TierLabel, records: I) -> Result<ShardManifest>
where
    I: IntoIterator<Item = &'a Record>,
{
    let mut lines = Vec::new();
    let mut ids = Vec::new();
    for r in records {
        if r.tier != tier {
            return Err(Error::ShardTier {
                expected: tier,
                found: r.tier,
                id: r.id.clone(),
            });
        }
        lines.push(serde_json::to_string(r)?);
        ids.push(r.id.clone());
    }
    let mut byte_count = 0u64;
    write_atomic(path, |w| {
        for line in &lines {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
            byte_count += line.len() as u64 + 1;
        }
        Ok(())
    })?;
    let manifest = ShardManifest {
        // relative to the manifest, which sits next to the shard
        path: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        tier,
        record_count: ids.len() as u64,
        byte_count,
        checksum: ShardManifest::checksum_of(ids.iter().map(String::as_str)),
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&manifest_path(path), |w| w.write_all(&json))?;
    Ok(manifest)
}

/// Streaming reader; yields records in file order and a [`LineError`] for
/// each malformed line.
pub struct ShardReader {
    path: String,
    lines: std::io::Split<BufReader<File>>,
    line_no: usize,
}

impl ShardReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(ShardReader {
            path: path.to_string_lossy().into_owned(),
            lines: BufReader::new(file).split(b'\n'),
            line_no: 0,
        })
    }
}

impl Iterator for ShardReader {
    type Item = std::result::Result<Record, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        let raw = self.lines.next()?;
        self.line_no += 1;
        let err = |message: String| LineError {
            path: self.path.clone(),
            line: self.line_no,
            message,
        };
        Some(match raw {
            Err(e) => Err(err(e.to_string())),
            Ok(bytes) => match std::str::from_utf8(&bytes) {
                Err(e) => Err(err(format!("invalid utf-8: {e}"))),
                Ok(line) => serde_json::from_str::<Record>(line).map_err(|e| err(e.to_string())),
            },
        })
    }
}

pub fn read_shard(path: &Path) -> Result<ShardContents> {
    let mut out = ShardContents::default();
    for item in ShardReader::open(path)? {
        match item {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

/// `*.jsonl` files of a directory in name order.
pub fn list_shards(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Default)]
pub struct DirContents {
    pub records: Vec<Record>,
    pub errors: Vec<LineError>,
    pub manifests: Vec<ShardManifest>,
}

/// Reads every shard of a tier directory in name order.
pub fn read_dir(dir: &Path) -> Result<DirContents> {
    let mut out = DirContents::default();
    for shard in list_shards(dir)? {
        let c = read_shard(&shard)?;
        out.records.extend(c.records);
        out.errors.extend(c.errors);
        let mpath = manifest_path(&shard);
        if mpath.exists() {
            let bytes = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
            out.manifests.push(serde_json::from_slice(&bytes)?);
        }
    }
    Ok(out)
}

/// Writes `records` into `dir` as `shard-NNNNN.jsonl` files of at most
/// `shard_size` records each. Stale shards in `dir` are removed first.
pub fn write_dir(dir: &Path, tier: TierLabel, records: &[Record], shard_size: usize) -> Result<Vec<ShardManifest>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for old in list_shards(dir)? {
        fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
        let m = manifest_path(&old);
        if m.exists() {
            fs::remove_file(&m).map_err(|e| Error::io(&m, e))?;
        }
    }
    let shard_size = shard_size.max(1);
    let mut manifests = Vec::new();
    if records.is_empty() {
        manifests.push(write_shard(&dir.join("shard-00000.jsonl"), tier, [])?);
    }
    for (i, chunk) in records.chunks(shard_size).enumerate() {
        manifests.push(write_shard(&dir.join(format!("shard-{i:05}.jsonl")), tier, chunk)?);
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, promote, Domain, OpStamp, SourceMeta};

    fn l1(text: &str, i: usize) -> Record {
        let l0 = new_record(text, SourceMeta::new(format!("u{i}"), "s", Domain::WebEn));
        promote(&l0, TierLabel::L1, OpStamp::new("t", "p", Some(0)), text.into(), &[]).unwrap()
    }

    #[test]
    fn empty_shard_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let m = write_shard(&p, TierLabel::L1, []).unwrap();
        assert_eq!(m.record_count, 0);
        assert_eq!(m.byte_count, 0);
        assert_eq!(m.checksum, ShardManifest::checksum_of([]));
        assert!(manifest_path(&p).exists());
        assert!(read_shard(&p).unwrap().records.is_empty());
    }

    #[test]
    fn three_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let recs: Vec<_> = (0..3).map(|i| l1(&format!("doc {i}"), i)).collect();
        let m = write_shard(&p, TierLabel::L1, &recs).unwrap();
        assert_eq!(m.record_count, 3);
        assert_eq!(m.byte_count, fs::metadata(&p).unwrap().len());
        let back = read_shard(&p).unwrap();
        assert_eq!(back.records, recs);
        assert!(back.errors.is_empty());
        assert_eq!(m.checksum, ShardManifest::checksum_of(back.records.iter().map(|r| r.id.as_str())));
    }

    #[test]
    fn mixed_tiers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = l1("a", 0);
        let b = promote(&a, TierLabel::L2, OpStamp::new("t", "p", Some(0)), "a".into(), &[]).unwrap();
        let err = write_shard(&dir.path().join("x.jsonl"), TierLabel::L1, [&a, &b]).unwrap_err();
        assert!(matches!(err, Error::ShardTier { .. }));
    }

    #[test]
    fn corrupt_line_is_reported_with_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let recs: Vec<_> = (0..10).map(|i| l1(&format!("doc {i}"), i)).collect();
        write_shard(&p, TierLabel::L1, &recs).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[4] = "{not json";
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        let back = read_shard(&p).unwrap();
        assert_eq!(back.records.len(), 9);
        assert_eq!(back.errors.len(), 1);
        assert_eq!(back.errors[0].line, 5);
    }

    #[test]
    fn empty_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        fs::write(&p, "").unwrap();
        let c = read_shard(&p).unwrap();
        assert!(c.records.is_empty() && c.errors.is_empty());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_shard(Path::new("/nonexistent/x.jsonl")), Err(Error::Io { .. })));
    }

    #[test]
    fn jsonl_schema_keys() {
        let r = l1("héllo", 0);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["id", "text", "tier", "source", "lang", "scores", "parents", "ops", "meta"] {
            assert!(keys.contains(&k.to_string()), "missing {k}");
        }
        assert_eq!(v["tier"], "L1");
        assert_eq!(v["source"]["domain"], "web_en");
        assert!(v["lang"].is_null());
    }

    #[test]
    fn write_dir_splits_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = (0..25).map(|i| l1(&format!("doc {i}"), i)).collect();
        let ms = write_dir(dir.path(), TierLabel::L1, &recs, 10).unwrap();
        assert_eq!(ms.len(), 3);
        let back = read_dir(dir.path()).unwrap();
        assert_eq!(back.records, recs);
        assert_eq!(back.manifests.len(), 3);
    }
}

//! L0 ingestion: raw plaintext, JSONL dumps and crawl envelopes become
//! archival records. Also hosts the minimal HTML-to-text extractor used by
//! L1 for crawl payloads.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{new_record, Domain, Record, SourceMeta};
use crate::error::{Error, Result};

/// Meta key marking a record whose text is an HTML payload.
pub const CONTENT_TYPE_KEY: &str = "content_type";
pub const HTML_CONTENT_TYPE: &str = "text/html";

/// Input layouts.
///
/// * `Plaintext`: the whole input is one document; source is `default_source`.
/// * `Jsonl`: one object per line; `"text"` is required, `"url"`,
///   `"snapshot"`, `"domain"` and `"lang"` override the defaults, other
///   scalar fields are kept in `meta`.
/// * `CrawlRecord`: one `{"url", "snapshot", "payload"}` envelope per line
///   (optional `"content_type"`, default `text/html`). The payload is
///   archived verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawSourceFormat {
    Plaintext,
    Jsonl,
    CrawlRecord,
}

impl FromStr for RawSourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plaintext" | "text" => Ok(RawSourceFormat::Plaintext),
            "jsonl" => Ok(RawSourceFormat::Jsonl),
            "crawl" | "crawl_record" => Ok(RawSourceFormat::CrawlRecord),
            other => Err(Error::Config(format!("unknown ingest format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    /// 1-based line for line-oriented formats, 0 for plaintext.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub records: Vec<Record>,
    pub skipped: Vec<SkipReport>,
}

pub fn ingest_raw<R: Read>(mut input: R, format: RawSourceFormat, default_source: &SourceMeta) -> Result<IngestOutput> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<input>", e))?;
    let mut out = IngestOutput::default();
    match format {
        RawSourceFormat::Plaintext => match std::str::from_utf8(&bytes) {
            Ok(text) => out.records.push(new_record(text, default_source.clone())),
            Err(e) => out.skipped.push(SkipReport {
                line: 0,
                reason: format!("invalid utf-8: {e}"),
            }),
        },
        RawSourceFormat::Jsonl | RawSourceFormat::CrawlRecord => {
            for (i, raw) in bytes.split(|b| *b == b'\n').enumerate() {
                let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
                if raw.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                let parsed = std::str::from_utf8(raw)
                    .map_err(|e| format!("invalid utf-8: {e}"))
                    .and_then(|line| serde_json::from_str::<Value>(line).map_err(|e| format!("malformed json: {e}")))
                    .and_then(|v| match format {
                        RawSourceFormat::Jsonl => map_jsonl(v, default_source),
                        _ => map_crawl(v, default_source),
                    });
                match parsed {
                    Ok(r) => out.records.push(r),
                    Err(reason) => out.skipped.push(SkipReport { line: i + 1, reason }),
                }
            }
        }
    }
    Ok(out)
}

fn opt_str<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> std::result::Result<Option<&'a str>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(format!("field {key:?} is not a string")),
    }
}

fn source_from(obj: &serde_json::Map<String, Value>, default: &SourceMeta) -> std::result::Result<SourceMeta, String> {
    let domain = match opt_str(obj, "domain")? {
        Some(d) => Domain::from_str(d).map_err(|e| e.to_string())?,
        None => default.domain,
    };
    Ok(SourceMeta {
        url: opt_str(obj, "url")?.unwrap_or(&default.url).to_string(),
        snapshot: opt_str(obj, "snapshot")?.unwrap_or(&default.snapshot).to_string(),
        domain,
    })
}

fn map_jsonl(v: Value, default: &SourceMeta) -> std::result::Result<Record, String> {
    let Value::Object(obj) = v else {
        return Err("line is not a json object".into());
    };
    let text = opt_str(&obj, "text")?.ok_or("missing \"text\" field")?;
    let mut rec = new_record(text, source_from(&obj, default)?);
    rec.lang = opt_str(&obj, "lang")?.map(str::to_string);
    let mut meta = BTreeMap::new();
    for (k, v) in &obj {
        if matches!(k.as_str(), "text" | "url" | "snapshot" | "domain" | "lang") {
            continue;
        }
        match v {
            Value::String(s) => meta.insert(k.clone(), s.clone()),
            Value::Number(_) | Value::Bool(_) => meta.insert(k.clone(), v.to_string()),
            _ => None,
        };
    }
    rec.meta = meta;
    Ok(rec)
}

fn map_crawl(v: Value, default: &SourceMeta) -> std::result::Result<Record, String> {
    let Value::Object(obj) = v else {
        return Err("line is not a json object".into());
    };
    let payload = opt_str(&obj, "payload")?.ok_or("missing \"payload\" field")?;
    let source = source_from(&obj, default)?;
    if source.snapshot.is_empty() {
        return Err("crawl record without snapshot".into());
    }
    let mut rec = new_record(payload, source);
    let ct = opt_str(&obj, "content_type")?.unwrap_or(HTML_CONTENT_TYPE);
    rec.meta.insert(CONTENT_TYPE_KEY.into(), ct.to_string());
    Ok(rec)
}

const BLOCK_TAGS: &[&str] = &["p", "div", "br", "li", "h1", "h2", "h3", "h4", "h5", "h6", "tr"];
const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let n = needle.len();
    let bytes = hay.as_bytes();
    (from..=bytes.len().saturating_sub(n)).find(|&i| bytes[i..i + n].eq_ignore_ascii_case(needle.as_bytes()))
}

/// End of a tag starting at `start` (`html[start] == '<'`): index after `>`,
/// honoring quoted attribute values. Unterminated tags run to the end.
fn tag_end(html: &str, start: usize) -> usize {
    let bytes = html.as_bytes();
    let mut quote: Option<u8> = None;
    for (i, &b) in bytes.iter().enumerate().skip(start + 1) {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return i + 1,
            None => {}
        }
    }
    bytes.len()
}

/// Tag-level HTML to text. Drops comments and script/style bodies, strips
/// tags, turns block-level tags into line breaks, decodes entities, trims
/// each line and drops blank lines.
pub fn extract_text(html: &str) -> String {
    let bytes = html.as_bytes();
    let mut out = String::with_capacity(html.len());
    let mut text_start = 0;
    let mut i = 0;
    let flush = |out: &mut String, from: usize, to: usize| {
        if from < to {
            out.push_str(&html_escape::decode_html_entities(&html[from..to]));
        }
    };
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &bytes[i + 1..];
        if rest.starts_with(b"!--") {
            flush(&mut out, text_start, i);
            i = match html[i + 4..].find("-->") {
                Some(p) => i + 4 + p + 3,
                None => bytes.len(),
            };
            text_start = i;
            continue;
        }
        let closing = rest.first() == Some(&b'/');
        let name_from = i + 1 + usize::from(closing);
        let name_len = bytes[name_from..]
            .iter()
            .take_while(|b| b.is_ascii_alphanumeric())
            .count();
        let is_markup = name_len > 0 && bytes[name_from].is_ascii_alphabetic() || matches!(rest.first(), Some(b'!' | b'?'));
        if !is_markup {
            i += 1;
            continue;
        }
        flush(&mut out, text_start, i);
        let name = html[name_from..name_from + name_len].to_ascii_lowercase();
        let mut end = tag_end(html, i);
        if !closing && RAW_TEXT_TAGS.contains(&name.as_str()) {
            let close = format!("</{name}");
            end = match find_ci(html, end, &close) {
                Some(p) => tag_end(html, p),
                None => bytes.len(),
            };
        } else if BLOCK_TAGS.contains(&name.as_str()) {
            out.push('\n');
        }
        i = end;
        text_start = end;
    }
    flush(&mut out, text_start, bytes.len());
    let text = out
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    strip_raw_text_openers(text)
}

/// Decoded entities (`&lt;script`) can spell a raw-text opener; drop the `<`.
fn strip_raw_text_openers(mut text: String) -> String {
    loop {
        let lower = text.to_ascii_lowercase();
        let hit = RAW_TEXT_TAGS
            .iter()
            .filter_map(|t| lower.find(&format!("<{t}")))
            .min();
        match hit {
            Some(p) => {
                text.remove(p);
            }
            None => return text,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub documents: u64,
    pub bytes: u64,
    pub per_domain: BTreeMap<String, u64>,
    /// Number of records whose id was already seen earlier in the shard set.
    pub duplicate_ids: u64,
    pub shards: u64,
    pub manifest_records: u64,
}

pub fn archive_stats(records: &[Record], manifests: &[crate::corpus::ShardManifest]) -> IngestReport {
    let mut report = IngestReport {
        shards: manifests.len() as u64,
        manifest_records: manifests.iter().map(|m| m.record_count).sum(),
        ..Default::default()
    };
    let mut seen: HashMap<&str, u32> = HashMap::new();
    for r in records {
        report.documents += 1;
        report.bytes += r.text.len() as u64;
        *report.per_domain.entry(r.source.domain.to_string()).or_default() += 1;
        let c = seen.entry(&r.id).or_default();
        if *c > 0 {
            report.duplicate_ids += 1;
        }
        *c += 1;
    }
    report
}

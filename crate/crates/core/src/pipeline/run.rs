use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{check_stage_order, PipelineConfig, Stage};
use crate::corpus::{now_secs, read_dir, write_dir, OpContext, Record, SourceMeta, TierLabel};
use crate::dedup::dedup_near;
use crate::error::{Error, Result};
use crate::filter::{builtin_profiles, run_l1_pipeline};
use crate::ingest::{archive_stats, ingest_raw, RawSourceFormat};
use crate::organize::{build_index, chunk_document, chunks_to_records, write_chunks};
use crate::refine::{run_l3_pipeline, GenerationClient, MockClient, WireClient};
use crate::schedule::{build_decay_mix, build_mix_schedule, build_pools, build_tiered_schedule, validate_manifest, PoolStats, Strategy};
use crate::select::{select, train_classifier, QualityModel};

pub const MODEL_FILE: &str = "model.udqm";
pub const DUP_MAP_FILE: &str = "dup_map.jsonl";
pub const INDEX_DIR: &str = "index";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const INDEX_FILE: &str = "index.udti";
/// Pool-id prefix for verification pools in decay schedules.
pub const VERIFICATION_PREFIX: &str = "verify:";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub records_in: u64,
    pub records_out: u64,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub started: u64,
    pub ended: u64,
    pub stages: Vec<StageReport>,
    pub exit_status: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config_hash: impl Into<String>) -> Self {
        RunReport {
            command: command.into(),
            config_hash: config_hash.into(),
            started: now_secs(),
            ended: 0,
            stages: Vec::new(),
            exit_status: EXIT_OK,
            error: None,
        }
    }

    pub fn finish(&mut self, result: &Result<()>) {
        match result {
            Ok(()) => self.finish_with(EXIT_OK, None),
            Err(e) => self.finish_with(exit_code(e), Some(e.to_string())),
        }
    }

    pub fn finish_with(&mut self, exit_status: i32, error: Option<String>) {
        self.ended = now_secs();
        self.exit_status = exit_status;
        self.error = error;
    }

    /// Copy with timestamps zeroed, for reproducibility comparisons.
    pub fn without_timestamps(&self) -> Self {
        RunReport {
            started: 0,
            ended: 0,
            ..self.clone()
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        crate::corpus::write_atomic(path, |w| std::io::Write::write_all(w, &json))
    }
}

/// Configuration problems map to 2, everything else to 1.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Dimension(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn display(work: &Path, p: &Path) -> String {
    p.strip_prefix(work).unwrap_or(p).to_string_lossy().into_owned()
}

fn default_input(stage: Stage, work: &Path) -> PathBuf {
    let dir = match stage {
        Stage::Ingest | Stage::Filter => "l0",
        Stage::Dedup => "l1",
        Stage::Classify | Stage::Select => {
            if work.join("l1_dedup").is_dir() {
                "l1_dedup"
            } else {
                "l1"
            }
        }
        Stage::Refine => "l2",
        Stage::Organize => "l3",
        Stage::Schedule => ".",
    };
    work.join(dir)
}

fn load_tier_dir(dir: &Path) -> Result<(Vec<Record>, u64)> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("input directory {} does not exist", dir.display())));
    }
    let c = read_dir(dir)?;
    Ok((c.records, c.errors.len() as u64))
}

fn raw_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("ingest needs at least one io.input path".into()));
    }
    Ok(out)
}

pub fn read_text_seeds(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let out = ingest_raw(f, RawSourceFormat::Jsonl, &SourceMeta::new("", "", crate::corpus::Domain::Other))?;
    Ok(out.records.into_iter().map(|r| r.text).collect())
}

pub fn make_client(cfg: &PipelineConfig) -> Result<Box<dyn GenerationClient>> {
    let g = &cfg.generator;
    Ok(match (&g.endpoint, &g.mock) {
        (Some(url), _) => Box::new(WireClient::from_env(url.clone(), Duration::from_millis(g.timeout_ms))),
        (None, Some(script)) => {
            let s = fs::read_to_string(script).map_err(|e| Error::io(script, e))?;
            Box::new(MockClient::from_json(&s).map_err(|e| Error::Config(format!("mock script: {e}")))?)
        }
        (None, None) => Box::new(MockClient::identity()),
    })
}

/// Executes single stages between explicit locations. `run_pipeline`
/// drives it with the conventional work-dir layout; the CLI passes paths
/// from flags. Paths in reports are shown relative to `io.work_dir`.
pub struct StageRunner<'a> {
    cfg: &'a PipelineConfig,
    work: PathBuf,
    ctx: OpContext,
}

impl<'a> StageRunner<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        StageRunner {
            cfg,
            work: cfg.io.work_dir.clone(),
            ctx: OpContext {
                timestamp: cfg.io.fixed_timestamp,
                seeds: json!(cfg.seeds),
            },
        }
    }

    pub fn context(&self) -> &OpContext {
        &self.ctx
    }

    fn write(&self, dir: &Path, tier: TierLabel, records: &[Record]) -> Result<Value> {
        let manifests = write_dir(dir, tier, records, self.cfg.io.shard_size)?;
        Ok(json!(manifests.len()))
    }

    fn report(&self, stage: Stage, input: Option<&Path>, output: Option<&Path>, n_in: usize, n_out: usize, details: Value) -> StageReport {
        StageReport {
            stage,
            input: input.map(|p| display(&self.work, p)),
            output: output.map(|p| display(&self.work, p)),
            records_in: n_in as u64,
            records_out: n_out as u64,
            details,
        }
    }

    /// Reads every `io.input` path (directories expand to their files, in
    /// name order). Skipped lines are listed under `details.skipped`.
    pub fn ingest(&self, out: &Path) -> Result<StageReport> {
        let io = &self.cfg.io;
        let mut records = Vec::new();
        let mut skipped = Vec::new();
        for file in raw_inputs(&io.input)? {
            let f = fs::File::open(&file).map_err(|e| Error::io(&file, e))?;
            let src = SourceMeta::new(file.to_string_lossy(), io.snapshot.clone(), io.domain);
            let got = ingest_raw(f, io.input_format, &src)?;
            skipped.extend(got.skipped.into_iter().map(|s| json!({"file": file.to_string_lossy(), "line": s.line, "reason": s.reason})));
            records.extend(got.records);
        }
        let manifests = write_dir(out, TierLabel::L0, &records, io.shard_size)?;
        let stats = archive_stats(&records, &manifests);
        let details = json!({ "archive": stats, "skipped": skipped });
        Ok(self.report(Stage::Ingest, None, Some(out), records.len() + skipped.len(), records.len(), details))
    }

    pub fn filter(&self, input: &Path, out: &Path) -> Result<StageReport> {
        let (records, bad) = load_tier_dir(input)?;
        let (kept, rep) = run_l1_pipeline(&records, &self.cfg.filter, &self.cfg.lang, &builtin_profiles(), &self.ctx)?;
        let shards = self.write(out, TierLabel::L1, &kept)?;
        let details = json!({ "report": rep, "read_errors": bad, "shards": shards });
        Ok(self.report(Stage::Filter, Some(input), Some(out), records.len(), kept.len(), details))
    }

    /// Writes survivors to `out` and `{"dup", "kept"}` lines to `dup_map`.
    pub fn dedup(&self, input: &Path, out: &Path, dup_map: &Path) -> Result<StageReport> {
        let (records, bad) = load_tier_dir(input)?;
        let n = records.len();
        let res = dedup_near(records, &self.cfg.dedup)?;
        let shards = self.write(out, TierLabel::L1, &res.kept)?;
        crate::corpus::write_atomic(dup_map, |w| {
            for link in &res.dup_map {
                serde_json::to_writer(&mut *w, link)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })?;
        let details = json!({ "report": res.report, "read_errors": bad, "shards": shards, "dup_map": display(&self.work, dup_map) });
        Ok(self.report(Stage::Dedup, Some(input), Some(out), n, res.kept.len(), details))
    }

    /// Trains from the seed files (or loads `classify.model`), optionally
    /// calibrates on `input`, and saves to `model_out`.
    pub fn classify(&self, input: &Path, model_out: &Path) -> Result<StageReport> {
        let c = &self.cfg.classify;
        let (mut model, trained, sizes) = match (&c.model, &c.positive, &c.negative) {
            (Some(m), _, _) => (QualityModel::load(m)?, false, (0, 0)),
            (None, Some(p), Some(n)) => {
                let (pos, neg) = (read_text_seeds(p)?, read_text_seeds(n)?);
                let m = train_classifier(&pos, &neg, &c.hyper, self.cfg.seeds.hash_seed)?;
                (m, true, (pos.len(), neg.len()))
            }
            _ => return Err(Error::Config("classify needs classify.model or both classify.positive and classify.negative".into())),
        };
        let mut n_in = 0;
        if c.calibrate {
            let (records, _) = load_tier_dir(input)?;
            n_in = records.len();
            let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
            model.calibrate(&texts)?;
        }
        model.save(model_out)?;
        let details = json!({
            "trained": trained,
            "positives": sizes.0,
            "negatives": sizes.1,
            "scale": model.scale_or_default(),
            "model": display(&self.work, model_out),
        });
        Ok(self.report(Stage::Classify, c.calibrate.then_some(input), Some(model_out), n_in, 0, details))
    }

    pub fn select(&self, input: &Path, model: &Path, out: &Path) -> Result<StageReport> {
        let model = QualityModel::load(model)?;
        let (records, bad) = load_tier_dir(input)?;
        let (kept, rep) = select(&records, &model, &self.cfg.select, &self.ctx)?;
        let shards = self.write(out, TierLabel::L2, &kept)?;
        let details = json!({ "report": rep, "read_errors": bad, "shards": shards });
        Ok(self.report(Stage::Select, Some(input), Some(out), records.len(), kept.len(), details))
    }

    pub fn refine(&self, input: &Path, out: &Path) -> Result<StageReport> {
        let client = make_client(self.cfg)?;
        let (records, bad) = load_tier_dir(input)?;
        let (l3, rep) = run_l3_pipeline(&records, client.as_ref(), &self.cfg.refine, &self.ctx)?;
        let shards = self.write(out, TierLabel::L3, &l3)?;
        let details = json!({ "report": rep, "read_errors": bad, "shards": shards });
        Ok(self.report(Stage::Refine, Some(input), Some(out), records.len(), l3.len(), details))
    }

    /// Chunks records of the configured tiers into L4 records under `out`
    /// and writes `chunks.jsonl` plus `index.udti` into `index_dir`.
    pub fn organize(&self, input: &Path, out: &Path, index_dir: &Path) -> Result<StageReport> {
        let o = &self.cfg.organize;
        let (records, bad) = load_tier_dir(input)?;
        let mut chunks = Vec::new();
        let mut l4 = Vec::new();
        for r in records.iter().filter(|r| o.tiers.contains(&r.tier)) {
            let cs = chunk_document(r, o.max_chunk_chars)?;
            l4.extend(chunks_to_records(r, &cs, &self.ctx)?);
            chunks.extend(cs);
        }
        let shards = self.write(out, TierLabel::L4, &l4)?;
        fs::create_dir_all(index_dir).map_err(|e| Error::io(index_dir, e))?;
        write_chunks(&index_dir.join(CHUNKS_FILE), &chunks)?;
        let index = build_index(&chunks);
        let index_path = index_dir.join(INDEX_FILE);
        index.save(&index_path)?;
        let details = json!({
            "chunks": chunks.len(),
            "terms": index.postings.len(),
            "read_errors": bad,
            "shards": shards,
            "index": display(&self.work, &index_path),
        });
        Ok(self.report(Stage::Organize, Some(input), Some(out), records.len(), l4.len(), details))
    }

    /// Pools every record under `inputs` (missing directories are skipped)
    /// and writes the schedule JSON to `out`.
    pub fn schedule(&self, inputs: &[PathBuf], out: &Path) -> Result<StageReport> {
        let s = &self.cfg.schedule;
        let mut records = Vec::new();
        for dir in inputs.iter().filter(|d| d.is_dir()) {
            records.extend(read_dir(dir)?.records);
        }
        let pools = build_pools(&records, s.estimator, "");
        let stats: Vec<PoolStats> = pools.iter().map(|p| p.stats.clone()).collect();
        let mut all = stats.clone();
        let schedule = match s.strategy {
            Strategy::Mix => build_mix_schedule(&stats, s.budget, &s.domain_mix)?,
            Strategy::Tiered => build_tiered_schedule(&stats, s.budget, &s.domain_mix, s.n_stages)?,
            Strategy::DecayMix => {
                let mut ver = Vec::new();
                for d in &s.verification_input {
                    ver.extend(load_tier_dir(d)?.0);
                }
                let vstats: Vec<PoolStats> = build_pools(&ver, s.estimator, VERIFICATION_PREFIX).into_iter().map(|p| p.stats).collect();
                all.extend(vstats.clone());
                build_decay_mix(&stats, &vstats, s.budget, s.verification_fraction)?
            }
        }
        .with_estimator(s.estimator);
        let report = validate_manifest(&schedule, &all);
        let body = schedule.to_json()?;
        crate::corpus::write_atomic(out, |w| std::io::Write::write_all(w, body.as_bytes()))?;
        let details = json!({
            "total_tokens": schedule.total_tokens,
            "stages": schedule.stages.len(),
            "validation": report,
            "schedule": display(&self.work, out),
        });
        Ok(self.report(Stage::Schedule, None, Some(out), records.len(), 0, details))
    }
}

/// Directories the schedule stage pools from, inside a work dir.
pub fn schedule_inputs(work: &Path) -> Vec<PathBuf> {
    let l1 = if work.join("l1_dedup").is_dir() { "l1_dedup" } else { "l1" };
    [l1, "l2", "l3"].iter().map(|d| work.join(d)).collect()
}

/// Runs `stages` in order, each reading the directory the previous record
/// stage wrote. The first stage reads `io.input` when given, else its
/// conventional directory under the work dir. A failing stage ends the run;
/// earlier outputs stay in place and the report carries the error.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> RunReport {
    let mut report = RunReport::new(
        format!("run {}", stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")),
        cfg.config_hash(),
    );
    let result = check_stage_order(stages).and_then(|_| cfg.validate()).and_then(|_| {
        let threads = cfg.io.worker_count.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| execute(cfg, stages, &mut report))
    });
    report.finish(&result);
    report
}

fn execute(cfg: &PipelineConfig, stages: &[Stage], report: &mut RunReport) -> Result<()> {
    let work = cfg.io.work_dir.clone();
    fs::create_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    let runner = StageRunner::new(cfg);
    let mut current: Option<PathBuf> = match (stages.first(), cfg.io.input.first()) {
        (Some(Stage::Ingest), _) | (None, _) => None,
        (Some(_), Some(p)) => Some(p.clone()),
        (Some(s), None) => Some(default_input(*s, &work)),
    };
    for &stage in stages {
        let input = current.clone().unwrap_or_else(|| default_input(stage, &work));
        let out = stage.output_dir().map(|d| work.join(d));
        let dest = out.clone().unwrap_or_default();
        let rep = match stage {
            Stage::Ingest => runner.ingest(&dest)?,
            Stage::Filter => runner.filter(&input, &dest)?,
            Stage::Dedup => runner.dedup(&input, &dest, &work.join(DUP_MAP_FILE))?,
            Stage::Classify => runner.classify(&input, &work.join(MODEL_FILE))?,
            Stage::Select => {
                let local = work.join(MODEL_FILE);
                let model = if local.is_file() {
                    local
                } else {
                    cfg.classify
                        .model
                        .clone()
                        .ok_or_else(|| Error::Config("select needs a model: run classify or set classify.model".into()))?
                };
                runner.select(&input, &model, &dest)?
            }
            Stage::Refine => runner.refine(&input, &dest)?,
            Stage::Organize => runner.organize(&input, &dest, &work.join(INDEX_DIR))?,
            Stage::Schedule => runner.schedule(&schedule_inputs(&work), &work.join(SCHEDULE_FILE))?,
        };
        report.stages.push(rep);
        if out.is_some() {
            current = out;
        }
    }
    Ok(())
}

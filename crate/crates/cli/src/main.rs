//! `udt`: command-line driver for the tiered corpus toolkit.
//!
//! Every command accepts `--config <file>` (a pipeline config; flags win)
//! and `--run-report <file>`, which receives a JSON run report on success
//! and on failure. Exit codes: 0 ok, 1 operational failure, 2 usage or
//! configuration error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use udt_core::corpus::{read_dir, trace_lineage, write_atomic, write_dir, OpContext, RecordStore};
use udt_core::ingest::{archive_stats, RawSourceFormat};
use udt_core::organize::{build_index, chunk_document, chunks_to_records, read_chunks, write_chunks, FactStore, TermIndex, TrustedStore};
use udt_core::pipeline::{
    exit_code, read_text_seeds, run_pipeline, PipelineConfig, RunReport, Stage, StageReport, StageRunner, EXIT_FAILURE, EXIT_OK, EXIT_USAGE, VERIFICATION_PREFIX,
};
use udt_core::refine::TaskKind;
use udt_core::schedule::{build_pools, materialize, parse_mix, validate_manifest, Pool, PoolStats, Schedule, Strategy, TokenEstimator};
use udt_core::select::{evaluate_classifier, QualityModel, SelectPolicy};
use udt_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "udt", version, about = "Tiered (L0-L4) pretraining corpus toolkit")]
struct Cli {
    /// Pipeline config JSON; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write a JSON run report to this path.
    #[arg(long, global = true)]
    run_report: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Archive raw inputs as L0 shards.
    Ingest {
        /// plaintext | jsonl | crawl
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        snapshot: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Heuristic L0 -> L1 cleaning.
    Filter {
        #[arg(long)]
        lang: Option<String>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the filter report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// MinHash-LSH near-duplicate removal within L1.
    Dedup {
        /// global | per-snapshot
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        bands: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Confirm candidates with exact shingle Jaccard.
        #[arg(long)]
        exact: bool,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Default: `<out>.dup_map.jsonl`.
        #[arg(long)]
        dup_map: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Quality classifier: train, score, select, eval.
    Classify {
        #[command(subcommand)]
        command: ClassifyCommand,
    },
    /// Model-driven L1 -> L2 selection (same as `classify select`).
    Select(SelectArgs),
    /// L2 -> L3 refinement through a generation client.
    Refine {
        /// Comma-separated task kinds (default: all).
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long, conflicts_with = "mock")]
        endpoint: Option<String>,
        /// Mock script JSON.
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Chunking, term index and fact store.
    Organize {
        #[command(subcommand)]
        command: OrganizeCommand,
    },
    /// Training-stage manifests.
    Schedule {
        #[command(subcommand)]
        command: ScheduleCommand,
    },
    /// Provenance queries.
    Lineage {
        #[command(subcommand)]
        command: LineageCommand,
    },
    /// Archive statistics of a shard directory.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run pipeline stages from the config against its work dir.
    Run {
        /// Comma-separated stages (default: the config's `stages`).
        #[arg(long)]
        stages: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, group = "policy")]
    threshold: Option<f64>,
    #[arg(long, group = "policy")]
    top_fraction: Option<f64>,
    #[arg(long, group = "policy")]
    min_bucket: Option<u8>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ClassifyCommand {
    /// Train on positive/negative seed JSONL files (`text` field).
    Train {
        #[arg(long)]
        positive: PathBuf,
        #[arg(long)]
        negative: PathBuf,
        /// Freeze the ordinal scale on this shard directory.
        #[arg(long)]
        calibrate_on: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score records; JSON lines {id, score, bucket}.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Default: stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Select(SelectArgs),
    /// Precision/recall/F1 on labelled seed files.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        positive: PathBuf,
        #[arg(long)]
        negative: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum OrganizeCommand {
    /// Split records into chunks.
    Chunk {
        #[arg(long = "in")]
        input: PathBuf,
        /// chunks JSONL
        #[arg(long)]
        out: PathBuf,
        /// Also write L4 chunk records to this directory.
        #[arg(long)]
        records_out: Option<PathBuf>,
        #[arg(long)]
        max_chars: Option<usize>,
    },
    /// Build a BM25 term index from a chunks file.
    Index {
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k chunks for the given terms, one JSON line each.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(required = true)]
        terms: Vec<String>,
    },
    Fact {
        #[command(subcommand)]
        command: FactCommand,
    },
}

#[derive(Subcommand, Debug)]
enum FactCommand {
    /// Register a triple with chunk evidence.
    Add {
        /// Fact store JSONL (created if missing).
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        relation: String,
        #[arg(long)]
        object: String,
        #[arg(long)]
        evidence: String,
    },
    /// Check unverified facts against a trusted-triples JSONL.
    Verify {
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long)]
        trusted: PathBuf,
    },
}

#[derive(Args, Debug)]
struct PoolArgs {
    /// Shard directories to pool (repeatable).
    #[arg(long = "in")]
    inputs: Vec<PathBuf>,
    /// Verification-data directories for decay schedules (repeatable).
    #[arg(long)]
    verification: Vec<PathBuf>,
    /// whitespace | chars_div4
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Subcommand, Debug)]
enum ScheduleCommand {
    Build {
        /// mix | tiered | decay
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
        /// e.g. web_en=0.5,web_zh=0.25,math=0.08,code=0.17
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long)]
        verification_fraction: Option<f64>,
        #[command(flatten)]
        pools: PoolArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a schedule against pool availability; exit 1 on violations.
    Validate {
        #[arg(long)]
        schedule: PathBuf,
        #[command(flatten)]
        pools: PoolArgs,
    },
    /// Resolve allocations to record ids.
    Materialize {
        #[arg(long)]
        schedule: PathBuf,
        #[command(flatten)]
        pools: PoolArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum LineageCommand {
    /// Print the ancestry chain of a record, L0 first.
    Trace {
        id: String,
        /// Shard directories forming the store (repeatable).
        #[arg(long = "store", required = true)]
        stores: Vec<PathBuf>,
    },
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse<T: FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

/// Loaded (or default) config with global flags applied.
fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.workers.is_some() {
        cfg.io.worker_count = cli.workers;
    }
    if cli.config.is_none() {
        cfg.io.work_dir = PathBuf::new();
    }
    Ok(cfg)
}

fn set_rng_seed(cfg: &mut PipelineConfig, seed: u64) {
    cfg.seeds.rng_seed = seed;
    cfg.classify.hyper.rng_seed = seed;
    cfg.refine.rng_seed = seed;
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let body = serde_json::to_vec_pretty(value)?;
    write_atomic(path, |w| w.write_all(&body))
}

fn print_stage(rep: &StageReport) -> Result<()> {
    println!("{}", serde_json::to_string(rep)?);
    Ok(())
}

fn with_pool<T: Send>(cfg: &PipelineConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let threads = cfg.io.worker_count.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(e.to_string()))?
        .install(f)
}

fn select_policy(args: &SelectArgs, cfg: &mut PipelineConfig) {
    if let Some(t) = args.threshold {
        cfg.select = SelectPolicy::Threshold { threshold: t };
    } else if let Some(f) = args.top_fraction {
        cfg.select = SelectPolicy::TopFraction { top_fraction: f };
    } else if let Some(b) = args.min_bucket {
        cfg.select = SelectPolicy::MinBucket { min_bucket: b, scale: None };
    }
}

fn run_select(cfg: &mut PipelineConfig, args: &SelectArgs, stages: &mut Vec<StageReport>) -> Result<()> {
    select_policy(args, cfg);
    let model = args
        .model
        .clone()
        .or_else(|| cfg.classify.model.clone())
        .ok_or_else(|| config_err("select needs --model"))?;
    let rep = with_pool(cfg, || StageRunner::new(cfg).select(&args.input, &model, &args.out))?;
    if let Some(p) = &args.report {
        write_json(p, &rep.details["report"])?;
    }
    print_stage(&rep)?;
    stages.push(rep);
    Ok(())
}

fn load_pools(cfg: &PipelineConfig, args: &PoolArgs) -> Result<(Vec<Pool>, TokenEstimator)> {
    let est = match &args.estimator {
        Some(e) => parse(e)?,
        None => cfg.schedule.estimator,
    };
    let read = |dirs: &[PathBuf]| -> Result<Vec<udt_core::corpus::Record>> {
        let mut v = Vec::new();
        for d in dirs {
            v.extend(read_dir(d)?.records);
        }
        Ok(v)
    };
    let mut pools = build_pools(&read(&args.inputs)?, est, "");
    pools.extend(build_pools(&read(&args.verification)?, est, VERIFICATION_PREFIX));
    Ok((pools, est))
}

fn load_schedule(path: &Path) -> Result<Schedule> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schedule::from_json(&s)
}

fn fact_store(chunks: &Path, facts: &Path) -> Result<FactStore> {
    let ids = read_chunks(chunks)?.into_iter().map(|c| c.chunk_id);
    let mut store = FactStore::new(ids);
    if facts.is_file() {
        store.load_facts(facts)?;
    }
    Ok(store)
}

/// Runs one command. Reports from record-producing stages are collected
/// into `stages`; the returned code overrides success when nonzero.
fn dispatch(cli: &Cli, stages: &mut Vec<StageReport>) -> Result<i32> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Ingest {
            format,
            domain,
            snapshot,
            out,
            inputs,
        } => {
            cfg.io.input_format = parse::<RawSourceFormat>(format)?;
            if let Some(d) = domain {
                cfg.io.domain = parse(d)?;
            }
            if let Some(s) = snapshot {
                cfg.io.snapshot = s.clone();
            }
            cfg.io.input = inputs.clone();
            cfg.validate()?;
            let rep = StageRunner::new(&cfg).ingest(out)?;
            if let Some(skipped) = rep.details["skipped"].as_array() {
                let mut err = std::io::stderr().lock();
                for s in skipped {
                    let _ = writeln!(err, "{s}");
                }
            }
            print_stage(&rep)?;
            stages.push(rep);
        }
        Command::Filter {
            lang,
            input,
            out,
            report,
        } => {
            if let Some(l) = lang {
                cfg.lang = l.clone();
            }
            cfg.validate()?;
            let rep = with_pool(&cfg, || StageRunner::new(&cfg).filter(input, out))?;
            if let Some(p) = report {
                write_json(p, &rep.details["report"])?;
            }
            print_stage(&rep)?;
            stages.push(rep);
        }
        Command::Dedup {
            scope,
            threshold,
            bands,
            rows,
            seed,
            exact,
            input,
            out,
            dup_map,
            report,
        } => {
            let d = &mut cfg.dedup;
            if let Some(s) = scope {
                d.scope = parse(s)?;
            }
            if let Some(t) = threshold {
                d.threshold = *t;
            }
            if let Some(b) = bands {
                d.bands = *b;
            }
            if let Some(r) = rows {
                d.rows = *r;
            }
            if bands.is_some() || rows.is_some() {
                d.num_perm = d.bands * d.rows;
            }
            if *exact {
                d.verification = udt_core::dedup::Verification::Exact;
            }
            if let Some(s) = seed {
                cfg.seeds.hash_seed = *s;
                cfg.dedup.seed = *s;
            }
            cfg.validate()?;
            let map = dup_map.clone().unwrap_or_else(|| {
                let mut name = out.file_name().unwrap_or_default().to_os_string();
                name.push(".dup_map.jsonl");
                out.with_file_name(name)
            });
            let rep = with_pool(&cfg, || StageRunner::new(&cfg).dedup(input, out, &map))?;
            if let Some(p) = report {
                write_json(p, &rep.details["report"])?;
            }
            print_stage(&rep)?;
            stages.push(rep);
        }
        Command::Classify { command } => match command {
            ClassifyCommand::Train {
                positive,
                negative,
                calibrate_on,
                seed,
                out,
            } => {
                if let Some(s) = seed {
                    set_rng_seed(&mut cfg, *s);
                }
                cfg.classify.model = None;
                cfg.classify.positive = Some(positive.clone());
                cfg.classify.negative = Some(negative.clone());
                cfg.classify.calibrate = calibrate_on.is_some();
                let input = calibrate_on.clone().unwrap_or_default();
                let rep = with_pool(&cfg, || StageRunner::new(&cfg).classify(&input, out))?;
                print_stage(&rep)?;
                stages.push(rep);
            }
            ClassifyCommand::Score { model, input, out } => {
                let model = QualityModel::load(model)?;
                let scale = model.scale_or_default();
                let records = read_dir(input)?.records;
                let mut body = String::new();
                for r in &records {
                    let p = model.score(&r.text);
                    let bucket = udt_core::select::bucket_score(p, &scale);
                    body.push_str(&json!({ "id": r.id, "score": p, "bucket": bucket }).to_string());
                    body.push('\n');
                }
                match out {
                    Some(p) => write_atomic(p, |w| w.write_all(body.as_bytes()))?,
                    None => print!("{body}"),
                }
            }
            ClassifyCommand::Select(args) => run_select(&mut cfg, args, stages)?,
            ClassifyCommand::Eval {
                model,
                positive,
                negative,
            } => {
                let model = QualityModel::load(model)?;
                let mut labelled: Vec<(String, bool)> = read_text_seeds(positive)?.into_iter().map(|t| (t, true)).collect();
                labelled.extend(read_text_seeds(negative)?.into_iter().map(|t| (t, false)));
                let m = evaluate_classifier(&model, &labelled)?;
                println!("{}", serde_json::to_string(&m)?);
            }
        },
        Command::Select(args) => run_select(&mut cfg, args, stages)?,
        Command::Refine {
            kinds,
            endpoint,
            mock,
            input,
            out,
            report,
        } => {
            if let Some(k) = kinds {
                cfg.refine.kinds = k.split(',').map(|s| parse::<TaskKind>(s.trim())).collect::<Result<_>>()?;
            }
            if endpoint.is_some() || mock.is_some() {
                cfg.generator.endpoint = endpoint.clone();
                cfg.generator.mock = mock.clone();
            }
            cfg.validate()?;
            let rep = StageRunner::new(&cfg).refine(input, out)?;
            if let Some(p) = report {
                write_json(p, &rep.details["report"])?;
            }
            print_stage(&rep)?;
            stages.push(rep);
        }
        Command::Organize { command } => return organize(&cfg, command),
        Command::Schedule { command } => return schedule(&mut cfg, command, stages),
        Command::Lineage {
            command: LineageCommand::Trace { id, stores },
        } => {
            let store = RecordStore::from_dirs(stores)?;
            let lin = trace_lineage(id, &store)?;
            for n in lin.chain() {
                let op = n.ops.last().map_or("-", |o| o.name.as_str());
                println!("{}\t{}\t{}", n.tier.as_str(), n.id, op);
            }
        }
        Command::Stats { input } => {
            let c = read_dir(input)?;
            let stats = archive_stats(&c.records, &c.manifests);
            println!("{}", json!({ "stats": stats, "read_errors": c.errors.len() }));
        }
        Command::Run { stages: names } => {
            if cli.config.is_none() {
                return Err(config_err("run needs --config"));
            }
            let order: Vec<Stage> = match names {
                Some(s) => s.split(',').map(|x| parse::<Stage>(x.trim())).collect::<Result<_>>()?,
                None => cfg.stages.clone(),
            };
            let rep = run_pipeline(&cfg, &order);
            for s in &rep.stages {
                print_stage(s)?;
            }
            stages.extend(rep.stages.iter().cloned());
            if let Some(e) = rep.error {
                eprintln!("error: {e}");
            }
            return Ok(rep.exit_status);
        }
    }
    Ok(EXIT_OK)
}

fn organize(cfg: &PipelineConfig, command: &OrganizeCommand) -> Result<i32> {
    match command {
        OrganizeCommand::Chunk {
            input,
            out,
            records_out,
            max_chars,
        } => {
            let max = max_chars.unwrap_or(cfg.organize.max_chunk_chars);
            let ctx = OpContext {
                timestamp: cfg.io.fixed_timestamp,
                seeds: json!(cfg.seeds),
            };
            let records = read_dir(input)?.records;
            let (mut chunks, mut l4) = (Vec::new(), Vec::new());
            for r in &records {
                let cs = chunk_document(r, max)?;
                if records_out.is_some() {
                    l4.extend(chunks_to_records(r, &cs, &ctx)?);
                }
                chunks.extend(cs);
            }
            write_chunks(out, &chunks)?;
            if let Some(dir) = records_out {
                write_dir(dir, udt_core::corpus::TierLabel::L4, &l4, cfg.io.shard_size)?;
            }
            println!("{}", json!({ "records": records.len(), "chunks": chunks.len() }));
        }
        OrganizeCommand::Index { chunks, out } => {
            let index = build_index(&read_chunks(chunks)?);
            index.save(out)?;
            println!("{}", json!({ "chunks": index.len(), "terms": index.postings.len() }));
        }
        OrganizeCommand::Query { index, k, terms } => {
            let index = TermIndex::load(index)?;
            for (rank, (id, score)) in index.query(terms, *k)?.into_iter().enumerate() {
                println!("{}", json!({ "rank": rank + 1, "chunk_id": id, "score": score }));
            }
        }
        OrganizeCommand::Fact {
            command:
                FactCommand::Add {
                    facts,
                    chunks,
                    subject,
                    relation,
                    object,
                    evidence,
                },
        } => {
            let mut store = fact_store(chunks, facts)?;
            let f = store.register_fact(subject, relation, object, evidence)?;
            store.save_facts(facts)?;
            println!("{}", serde_json::to_string(&f)?);
        }
        OrganizeCommand::Fact {
            command: FactCommand::Verify { facts, chunks, trusted },
        } => {
            let mut store = fact_store(chunks, facts)?;
            let counts = store.verify_all(&TrustedStore::load(trusted)?);
            store.save_facts(facts)?;
            println!("{}", serde_json::to_string(&counts)?);
        }
    }
    Ok(EXIT_OK)
}

fn schedule(cfg: &mut PipelineConfig, command: &ScheduleCommand, stages: &mut Vec<StageReport>) -> Result<i32> {
    match command {
        ScheduleCommand::Build {
            strategy,
            budget,
            mix,
            stages: n,
            verification_fraction,
            pools,
            out,
        } => {
            let s = &mut cfg.schedule;
            if let Some(x) = strategy {
                s.strategy = parse::<Strategy>(x)?;
            }
            if let Some(b) = budget {
                s.budget = *b;
            }
            if let Some(m) = mix {
                s.domain_mix = parse_mix(m)?;
            }
            if let Some(n) = n {
                s.n_stages = *n;
            }
            if let Some(f) = verification_fraction {
                s.verification_fraction = *f;
            }
            if let Some(e) = &pools.estimator {
                s.estimator = parse(e)?;
            }
            if !pools.verification.is_empty() {
                s.verification_input = pools.verification.clone();
            }
            if pools.inputs.is_empty() {
                return Err(config_err("schedule build needs at least one --in directory"));
            }
            for d in &pools.inputs {
                if !d.is_dir() {
                    return Err(config_err(format!("input directory {} does not exist", d.display())));
                }
            }
            let rep = StageRunner::new(cfg).schedule(&pools.inputs, out)?;
            print_stage(&rep)?;
            let ok = rep.details["validation"]["violations"].as_array().is_some_and(|v| v.is_empty());
            stages.push(rep);
            if !ok {
                return Ok(EXIT_FAILURE);
            }
        }
        ScheduleCommand::Validate { schedule, pools } => {
            let s = load_schedule(schedule)?;
            let (pools, _) = load_pools(cfg, pools)?;
            let stats: Vec<PoolStats> = pools.into_iter().map(|p| p.stats).collect();
            let report = validate_manifest(&s, &stats);
            println!("{}", serde_json::to_string(&report)?);
            if !report.is_ok() {
                return Ok(EXIT_FAILURE);
            }
        }
        ScheduleCommand::Materialize {
            schedule,
            pools,
            seed,
            out,
        } => {
            let s = load_schedule(schedule)?;
            let (pools, _) = load_pools(cfg, pools)?;
            let m = materialize(&s, &pools, seed.unwrap_or(cfg.seeds.rng_seed))?;
            write_json(out, &serde_json::to_value(&m)?)?;
            let summary: BTreeMap<usize, usize> = m.stages.iter().map(|st| (st.stage_index, st.ids.len())).collect();
            println!("{}", json!({ "records_per_stage": summary }));
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    let hash = base_config(&cli).map(|c| c.config_hash()).unwrap_or_default();
    let mut report = RunReport::new(argv[1..].join(" "), hash);
    let mut stages = Vec::new();
    let result = dispatch(&cli, &mut stages);
    report.stages = stages;
    let code = match &result {
        Ok(code) => {
            report.finish_with(*code, None);
            *code
        }
        Err(e) => {
            eprintln!("error: {e}");
            report.finish_with(exit_code(e), Some(e.to_string()));
            exit_code(e)
        }
    };
    if let Some(p) = &cli.run_report {
        if let Err(e) = report.write(p) {
            eprintln!("error: writing run report: {e}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    }
    ExitCode::from(code as u8)
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use udt_core::corpus::{read_dir, trace_lineage, RecordStore, TierLabel};
use udt_core::fixture::{classifier_seeds, expected, pipeline_corpus, to_jsonl};
use udt_core::pipeline::{run_pipeline, PipelineConfig, Stage, EXIT_OK, EXIT_USAGE};

fn write_seeds(path: &Path, texts: &[String]) {
    let body: String = texts.iter().map(|t| serde_json::json!({ "text": t }).to_string() + "\n").collect();
    fs::write(path, body).unwrap();
}

fn setup(dir: &Path) -> PipelineConfig {
    let docs = pipeline_corpus(11);
    fs::write(dir.join("corpus.jsonl"), to_jsonl(&docs)).unwrap();
    let (pos, neg) = classifier_seeds(11, 150);
    write_seeds(&dir.join("pos.jsonl"), &pos);
    write_seeds(&dir.join("neg.jsonl"), &neg);
    let cfg = serde_json::json!({
        "io": {
            "input": [dir.join("corpus.jsonl")],
            "input_format": "jsonl",
            "work_dir": dir.join("work"),
            "fixed_timestamp": 1_700_000_000u64,
            "worker_count": 2,
        },
        "seeds": { "rng_seed": 3, "hash_seed": 5 },
        "classify": { "positive": dir.join("pos.jsonl"), "negative": dir.join("neg.jsonl") },
        "refine": { "kinds": ["edit", "qa_stratified"] },
    });
    PipelineConfig::from_json(&cfg.to_string()).unwrap()
}

fn urls_in(dir: &Path) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for r in read_dir(dir).unwrap().records {
        *m.entry(r.source.url).or_default() += 1;
    }
    m
}

#[test]
fn fixture_survivors_match_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let report = run_pipeline(&cfg, &Stage::DEFAULT);
    assert_eq!(report.exit_status, EXIT_OK, "{:?}", report.error);
    let docs = pipeline_corpus(11);
    let work = tmp.path().join("work");
    let l1 = urls_in(&work.join("l1"));
    let dd = urls_in(&work.join("l1_dedup"));
    let l2 = urls_in(&work.join("l2"));
    for (i, d) in docs.iter().enumerate() {
        let e = expected(&docs, i);
        assert_eq!(l1.contains_key(&d.url), e.l1_reason.is_none(), "l1 {i} {:?}", d.label);
        assert_eq!(dd.contains_key(&d.url), e.survives_dedup, "dedup {i} {:?}", d.label);
        assert_eq!(l2.contains_key(&d.url), e.reaches_l2, "l2 {i} {:?}", d.label);
    }
    let filter = &report.stages[1].details["report"]["rejected"];
    for reason in ["too_short", "punct_ratio", "dup_lines", "short_lines", "language"] {
        assert_eq!(filter[reason], 10, "{reason}");
    }
    for s in &report.stages {
        if s.stage != Stage::Classify {
            assert!(s.records_out > 0, "{:?}", s.stage);
        }
    }
}

#[test]
fn l3_and_l4_trace_to_one_origin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let report = run_pipeline(&cfg, &Stage::DEFAULT);
    assert_eq!(report.exit_status, EXIT_OK, "{:?}", report.error);
    let work = tmp.path().join("work");
    let store = RecordStore::from_dirs(&[
        work.join("l0"),
        work.join("l1"),
        work.join("l1_dedup"),
        work.join("l2"),
        work.join("l3"),
        work.join("l4"),
    ])
    .unwrap();
    let mut n = 0;
    for r in store.records().filter(|r| r.tier >= TierLabel::L3) {
        let lin = trace_lineage(&r.id, &store).unwrap();
        assert_eq!(lin.origins().len(), 1);
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn partial_stage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let first = run_pipeline(&cfg, &[Stage::Ingest, Stage::Filter]);
    assert_eq!(first.exit_status, EXIT_OK);
    let mut dedup_only = cfg.clone();
    dedup_only.io.input.clear();
    let r = run_pipeline(&dedup_only, &[Stage::Dedup]);
    assert_eq!(r.exit_status, EXIT_OK, "{:?}", r.error);
    assert_eq!(r.stages.len(), 1);
    assert_eq!(r.stages[0].input.as_deref(), Some("l1"));
    let bad = run_pipeline(&cfg, &[Stage::Select, Stage::Filter]);
    assert_eq!(bad.exit_status, EXIT_USAGE);
    assert!(bad.stages.is_empty());
}

#[test]
fn failing_stage_keeps_earlier_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = setup(tmp.path());
    cfg.classify.positive = None;
    let r = run_pipeline(&cfg, &Stage::DEFAULT);
    assert_ne!(r.exit_status, EXIT_OK);
    assert!(r.error.is_some());
    assert_eq!(r.stages.len(), 3);
    assert!(tmp.path().join("work/l1_dedup").is_dir());
}

//! L3 refinement: plan edit and synthesis tasks over L2 seeds, run them
//! through a generation client, and promote only validated outputs.

mod client;
mod latex;
mod plan;
mod validate;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use client::{apply_transformer, Candidate, GenerationClient, MockClient, MockRule, MockScript, RetryPolicy, WireClient, TOKEN_ENV};
pub use latex::{is_balanced, latex_balance, normalize_seed, Balance};
pub use plan::{
    plan_refinement, seed_excerpt, template, Level, RefinementRequest, RequestParams, Style, TaskKind, PERSONA_PAIRS, SEED_CLOSE,
    SEED_OPEN,
};
pub use validate::{
    alnum_fraction, content_overlap, content_words, ends_cleanly, seed_similarity, validate_output, RejectReason, ValidateConfig,
    ValidationVerdict,
};

use crate::corpus::{promote, OpContext, Record, TierLabel};
use crate::error::{Error, Result};

pub const OP_NAME: &str = "l3_refine";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub kinds: Vec<TaskKind>,
    pub rng_seed: u64,
    pub max_output_chars: usize,
    /// Upper bound on in-flight generation calls.
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub validate: ValidateConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            kinds: TaskKind::ALL.to_vec(),
            rng_seed: 0,
            max_output_chars: 16_000,
            concurrency: 4,
            retry: RetryPolicy::default(),
            validate: ValidateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindReport {
    pub requested: u64,
    pub accepted: u64,
    pub failed: u64,
    /// Every failing check is counted, so one candidate may add to several.
    pub rejected: BTreeMap<RejectReason, u64>,
}

impl KindReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.accepted as f64 / self.requested as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub seed_id: String,
    pub kind: TaskKind,
    /// `None` when generation failed.
    pub verdict: Option<ValidationVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    pub seeds: u64,
    pub per_kind: BTreeMap<TaskKind, KindReport>,
    pub outcomes: Vec<TaskOutcome>,
}

/// Runs plan, apply and validate for each seed and kind. Generation errors
/// are recorded and do not stop the run. Output follows seed order, then
/// the order of `cfg.kinds`.
pub fn run_l3_pipeline(shard: &[Record], client: &dyn GenerationClient, cfg: &RefineConfig, ctx: &OpContext) -> Result<(Vec<Record>, RefineReport)> {
    if let Some(bad) = shard.iter().find(|r| r.tier != TierLabel::L2) {
        return Err(Error::ShardTier {
            expected: TierLabel::L2,
            found: bad.tier,
            id: bad.id.clone(),
        });
    }
    cfg.validate.validate()?;
    if cfg.concurrency == 0 {
        return Err(Error::Config("refine concurrency must be >= 1".into()));
    }
    let tasks: Vec<(&Record, TaskKind)> = shard.iter().flat_map(|r| cfg.kinds.iter().map(move |&k| (r, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(RefinementRequest, Result<(Candidate, ValidationVerdict)>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(seed, kind)| {
                let req = plan_refinement(seed, kind, cfg.rng_seed, cfg.max_output_chars);
                let res = apply_transformer(&req, client, &cfg.retry).map(|cand| {
                    let excerpt = seed_excerpt(&req.prompt).unwrap_or("");
                    let verdict = validate_output(&cand.text, excerpt, kind, cand.truncated, &cfg.validate);
                    (cand, verdict)
                });
                (req, res)
            })
            .collect()
    });

    let mut report = RefineReport {
        seeds: shard.len() as u64,
        ..Default::default()
    };
    for &k in &cfg.kinds {
        report.per_kind.entry(k).or_default();
    }
    let mut out = Vec::new();
    for ((seed, kind), (req, res)) in tasks.iter().zip(results) {
        let kr = report.per_kind.entry(*kind).or_default();
        kr.requested += 1;
        match res {
            Err(e) => {
                kr.failed += 1;
                report.outcomes.push(TaskOutcome {
                    seed_id: seed.id.clone(),
                    kind: *kind,
                    verdict: None,
                    error: Some(e.to_string()),
                });
            }
            Ok((cand, verdict)) => {
                for r in &verdict.reasons {
                    *kr.rejected.entry(*r).or_default() += 1;
                }
                if verdict.accepted {
                    kr.accepted += 1;
                    let stamp = ctx.stamp(
                        OP_NAME,
                        &serde_json::json!({
                            "kind": kind,
                            "params": req.params,
                            "template": req.template_version,
                            "validate": cfg.validate,
                        }),
                    );
                    let mut rec = promote(seed, TierLabel::L3, stamp, cand.text, &[])?;
                    rec.meta.insert("kind".into(), kind.as_str().into());
                    rec.meta.insert("template".into(), req.template_version.clone());
                    out.push(rec);
                }
                report.outcomes.push(TaskOutcome {
                    seed_id: seed.id.clone(),
                    kind: *kind,
                    verdict: Some(verdict),
                    error: None,
                });
            }
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{new_record, Domain, SourceMeta};

    fn seeds(n: usize) -> Vec<Record> {
        (0..n)
            .map(|i| {
                let text = format!(
                    "Lesson {i}: the circumference of a circle with radius r equals $2\\pi r$, and its area equals $\\pi r^2$ for every positive radius value."
                );
                let l0 = new_record(&text, SourceMeta::new(format!("u{i}"), "s", Domain::Math));
                let l1 = promote(&l0, TierLabel::L1, OpContext::fixed(0).stamp("a", "p"), text.clone(), &[]).unwrap();
                promote(&l1, TierLabel::L2, OpContext::fixed(0).stamp("b", "p"), text, &[]).unwrap()
            })
            .collect()
    }

    fn quick() -> RefineConfig {
        RefineConfig {
            retry: RetryPolicy {
                max_retries: 2,
                base_delay_ms: 0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn identity_edit_all_accepted() {
        let cfg = RefineConfig {
            kinds: vec![TaskKind::Edit],
            ..quick()
        };
        let (out, rep) = run_l3_pipeline(&seeds(5), &MockClient::identity(), &cfg, &OpContext::fixed(0)).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(rep.per_kind[&TaskKind::Edit].acceptance_rate(), 1.0);
        assert!(out.iter().all(|r| r.tier == TierLabel::L3 && r.meta["kind"] == "edit"));
    }

    #[test]
    fn six_kinds_six_records() {
        let script = MockScript {
            rules: vec![
                MockRule {
                    kind: Some(TaskKind::Edit),
                    ..Default::default()
                },
                MockRule {
                    text: Some("A fresh explanation about shapes, with the formula $A = s^2$ for squares.".into()),
                    ..Default::default()
                },
            ],
        };
        let s = seeds(3);
        let (out, _) = run_l3_pipeline(&s, &MockClient::new(script), &quick(), &OpContext::fixed(0)).unwrap();
        assert_eq!(out.len(), 18);
        for seed in &s {
            assert_eq!(out.iter().filter(|r| r.parents == vec![seed.id.clone()]).count(), 6);
        }
    }

    #[test]
    fn bad_kind_is_isolated() {
        let script = MockScript {
            rules: vec![
                MockRule {
                    kind: Some(TaskKind::QaStratified),
                    text: Some("Q: what is $x+1".into()),
                    ..Default::default()
                },
                MockRule {
                    kind: Some(TaskKind::Dialogue),
                    error: Some("boom".into()),
                    ..Default::default()
                },
            ],
        };
        let cfg = RefineConfig {
            kinds: vec![TaskKind::Edit, TaskKind::QaStratified, TaskKind::Dialogue],
            ..quick()
        };
        let (out, rep) = run_l3_pipeline(&seeds(4), &MockClient::new(script), &cfg, &OpContext::fixed(0)).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(rep.per_kind[&TaskKind::QaStratified].acceptance_rate(), 0.0);
        assert_eq!(rep.per_kind[&TaskKind::QaStratified].rejected[&RejectReason::LatexUnbalanced], 4);
        assert_eq!(rep.per_kind[&TaskKind::Dialogue].failed, 4);
        assert_eq!(rep.per_kind[&TaskKind::Edit].acceptance_rate(), 1.0);
    }

    #[test]
    fn requires_l2() {
        let l0 = new_record("x", SourceMeta::new("u", "s", Domain::Math));
        assert!(run_l3_pipeline(&[l0], &MockClient::identity(), &quick(), &OpContext::fixed(0)).is_err());
    }
}

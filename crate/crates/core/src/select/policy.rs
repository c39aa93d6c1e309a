use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::QualityModel;
use super::scale::{bucket_score, OrdinalScale};
use crate::corpus::{promote, OpContext, Record, TierLabel};
use crate::error::{Error, Result};

pub const OP_NAME: &str = "l2_select";
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SelectPolicy {
    Threshold {
        threshold: f64,
    },
    TopFraction {
        top_fraction: f64,
    },
    MinBucket {
        min_bucket: u8,
        /// Defaults to the model's frozen scale.
        #[serde(default)]
        scale: Option<OrdinalScale>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub kept: u64,
    pub rejected: u64,
    /// Score counts over `[0,1]` in equal-width bins.
    pub histogram: Vec<u64>,
}

/// Scores an L1 shard and promotes the chosen records to L2 with
/// `scores.quality` and `scores.quality_bucket`. Output keeps input order.
pub fn select(records: &[Record], model: &QualityModel, policy: &SelectPolicy, ctx: &OpContext) -> Result<(Vec<Record>, SelectReport)> {
    if let Some(bad) = records.iter().find(|r| r.tier != TierLabel::L1) {
        return Err(Error::ShardTier {
            expected: TierLabel::L1,
            found: bad.tier,
            id: bad.id.clone(),
        });
    }
    let scale = match policy {
        SelectPolicy::MinBucket { scale: Some(s), .. } => s.clone(),
        _ => model.scale_or_default(),
    };
    let scores: Vec<f64> = records.par_iter().map(|r| model.score(&r.text)).collect();

    let keep: Vec<bool> = match policy {
        SelectPolicy::Threshold { threshold } => scores.iter().map(|&s| s >= *threshold).collect(),
        SelectPolicy::MinBucket { min_bucket, .. } => {
            if *min_bucket > 5 {
                return Err(Error::Config(format!("min_bucket {min_bucket} outside 0..=5")));
            }
            scores.iter().map(|&s| bucket_score(s, &scale) >= *min_bucket).collect()
        }
        SelectPolicy::TopFraction { top_fraction } => {
            let f = *top_fraction;
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("top_fraction {f} outside (0,1]")));
            }
            let n = ((f * records.len() as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| records[a].id.cmp(&records[b].id)));
            let mut keep = vec![false; records.len()];
            for &i in order.iter().take(n) {
                keep[i] = true;
            }
            keep
        }
    };

    let mut report = SelectReport {
        histogram: vec![0; HISTOGRAM_BINS],
        ..Default::default()
    };
    for &s in &scores {
        let bin = ((s * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        report.histogram[bin] += 1;
    }
    let stamp = ctx.stamp(
        OP_NAME,
        &serde_json::json!({ "policy": policy, "scale": scale, "model": model.feature_spec, "hyper": model.hyper }),
    );
    let mut out = Vec::new();
    for ((r, &s), &k) in records.iter().zip(&scores).zip(&keep) {
        if !k {
            report.rejected += 1;
            continue;
        }
        report.kept += 1;
        let mut promoted = promote(r, TierLabel::L2, stamp.clone(), r.text.clone(), &[])?;
        promoted.scores.insert("quality".into(), s);
        promoted.scores.insert("quality_bucket".into(), f64::from(bucket_score(s, &scale)));
        out.push(promoted);
    }
    Ok((out, report))
}

use serde::{Deserialize, Serialize};

use super::model::QualityModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ClassifierMetrics {
    /// Precision is 0 when nothing is predicted positive.
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassifierMetrics {
            precision,
            recall,
            f1,
            accuracy: div(tp + tn, tp + fp + tn + fn_),
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

/// Metrics at the 0.5 decision threshold over `(text, is_positive)` pairs.
pub fn evaluate_classifier<S: AsRef<str>>(model: &QualityModel, holdout: &[(S, bool)]) -> Result<ClassifierMetrics> {
    let positives = holdout.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == holdout.len() {
        return Err(Error::UndefinedMetric("holdout must contain both labels".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (text, y) in holdout {
        match (model.score(text.as_ref()) >= 0.5, *y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ClassifierMetrics::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::{FeatureSpec, Hyper, FEATURE_DIM};

    fn constant_model(bias: f32) -> QualityModel {
        QualityModel {
            weights: vec![0.0; FEATURE_DIM],
            bias,
            hyper: Hyper::default(),
            feature_spec: FeatureSpec::new(0),
            scale: None,
        }
    }

    #[test]
    fn all_positive_predictions() {
        let holdout = vec![("a", true), ("b", true), ("c", false), ("d", false)];
        let m = evaluate_classifier(&constant_model(5.0), &holdout).unwrap();
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        let holdout = vec![("a", true), ("b", true)];
        assert!(matches!(evaluate_classifier(&constant_model(0.0), &holdout), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn hand_counted_confusion() {
        // tp=6 fp=2 tn=9 fn=3
        let m = ClassifierMetrics::from_counts(6, 2, 9, 3);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 6.0 / 9.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 * 0.75 * (6.0 / 9.0) / (0.75 + 6.0 / 9.0)).abs() < 1e-12);
        assert!((m.accuracy - 15.0 / 20.0).abs() < 1e-12);
        let perfect = ClassifierMetrics::from_counts(5, 0, 5, 0);
        assert_eq!((perfect.precision, perfect.recall, perfect.f1, perfect.accuracy), (1.0, 1.0, 1.0, 1.0));
    }
}

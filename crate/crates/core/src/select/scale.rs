use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five strictly ascending cutpoints in `(0,1)` mapping a probability to an
/// ordinal score 0-5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrdinalScale {
    cutpoints: [f64; 5],
}

impl OrdinalScale {
    pub fn new(cutpoints: [f64; 5]) -> Result<Self> {
        if cutpoints.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(Error::Config(format!("cutpoints must lie in (0,1): {cutpoints:?}")));
        }
        if cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("cutpoints must be strictly ascending: {cutpoints:?}")));
        }
        Ok(OrdinalScale { cutpoints })
    }

    pub fn cutpoints(&self) -> &[f64; 5] {
        &self.cutpoints
    }

    /// Equal-mass cutpoints (sixths) of `scores`, nudged to stay strictly
    /// ascending inside `(0,1)`.
    pub fn from_quantiles(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Config("calibration needs at least one score".into()));
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        const EPS: f64 = 1e-9;
        let mut cuts = [0.0; 5];
        for (k, c) in cuts.iter_mut().enumerate() {
            let q = (k + 1) as f64 / 6.0;
            let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            *c = sorted[idx].clamp(EPS * (k + 1) as f64, 1.0 - EPS * (5 - k) as f64);
        }
        for k in 1..5 {
            if cuts[k] <= cuts[k - 1] {
                cuts[k] = cuts[k - 1] + EPS;
            }
        }
        Self::new(cuts)
    }
}

impl Default for OrdinalScale {
    fn default() -> Self {
        OrdinalScale {
            cutpoints: [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0, 4.0 / 6.0, 5.0 / 6.0],
        }
    }
}

impl TryFrom<Vec<f64>> for OrdinalScale {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; 5] = v
            .try_into()
            .map_err(|v: Vec<f64>| Error::Config(format!("expected 5 cutpoints, got {}", v.len())))?;
        OrdinalScale::new(arr)
    }
}

impl From<OrdinalScale> for Vec<f64> {
    fn from(s: OrdinalScale) -> Self {
        s.cutpoints.to_vec()
    }
}

/// Number of cutpoints `<= p`.
pub fn bucket_score(p: f64, scale: &OrdinalScale) -> u8 {
    scale.cutpoints.iter().filter(|&&c| c <= p).count() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> OrdinalScale {
        OrdinalScale::new([0.2, 0.4, 0.6, 0.8, 0.9]).unwrap()
    }

    #[test]
    fn endpoints_and_counting() {
        assert_eq!(bucket_score(0.0, &sample()), 0);
        assert_eq!(bucket_score(1.0, &sample()), 5);
        assert_eq!(bucket_score(0.65, &sample()), 3);
        assert_eq!(bucket_score(0.6, &sample()), 3);
    }

    #[test]
    fn rejects_bad_cutpoints() {
        assert!(OrdinalScale::new([0.2, 0.2, 0.6, 0.8, 0.9]).is_err());
        assert!(OrdinalScale::new([0.0, 0.2, 0.6, 0.8, 0.9]).is_err());
        assert!(serde_json::from_str::<OrdinalScale>("[0.1,0.2]").is_err());
        let s: OrdinalScale = serde_json::from_str("[0.2,0.4,0.6,0.8,0.9]").unwrap();
        assert_eq!(s, sample());
    }

    #[test]
    fn quantiles_of_degenerate_scores_stay_valid() {
        let s = OrdinalScale::from_quantiles(&[0.5; 10]).unwrap();
        assert!(s.cutpoints().windows(2).all(|w| w[0] < w[1]));
        let s = OrdinalScale::from_quantiles(&[0.0, 1.0]).unwrap();
        assert!(s.cutpoints()[0] > 0.0 && s.cutpoints()[4] < 1.0);
    }

    #[test]
    fn quantiles_split_evenly() {
        let scores: Vec<f64> = (1..=600).map(|i| i as f64 / 601.0).collect();
        let s = OrdinalScale::from_quantiles(&scores).unwrap();
        let mut counts = [0usize; 6];
        for &p in &scores {
            counts[bucket_score(p, &s) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (99..=101).contains(&c)), "{counts:?}");
    }

    proptest! {
        #[test]
        fn nondecreasing(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bucket_score(lo, &sample()) <= bucket_score(hi, &sample()));
        }
    }
}

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize_with_seed, FeatureVector, FEATURE_BITS, FEATURE_DIM};
use super::scale::OrdinalScale;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"UDQM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub epochs: usize,
    /// Initial step size; epoch `e` uses `learning_rate / (1 + e)`.
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            epochs: 10,
            learning_rate: 0.5,
            l2_penalty: 1e-5,
            batch_size: 16,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub ngrams: String,
    pub hash_seed: u64,
    pub dim_bits: u32,
}

impl FeatureSpec {
    pub fn new(hash_seed: u64) -> Self {
        FeatureSpec {
            ngrams: "word_unigram+bigram".into(),
            hash_seed,
            dim_bits: FEATURE_BITS,
        }
    }
}

/// Header blob of the model file.
#[derive(Serialize, Deserialize)]
struct ModelHeader {
    hyper: Hyper,
    feature_spec: FeatureSpec,
    scale: Option<OrdinalScale>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub weights: Vec<f32>,
    pub bias: f32,
    pub hyper: Hyper,
    pub feature_spec: FeatureSpec,
    /// Calibrated ordinal cutpoints, when frozen into the model.
    pub scale: Option<OrdinalScale>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl QualityModel {
    pub fn featurize(&self, text: &str) -> FeatureVector {
        featurize_with_seed(text, self.feature_spec.hash_seed)
    }

    pub fn score_features(&self, x: &FeatureVector) -> f64 {
        sigmoid(x.dot(&self.weights) + f64::from(self.bias))
    }

    /// `sigmoid(w·x + b)`.
    pub fn score(&self, text: &str) -> f64 {
        self.score_features(&self.featurize(text))
    }

    /// The model's frozen scale, or equal sixths when uncalibrated.
    pub fn scale_or_default(&self) -> OrdinalScale {
        self.scale.clone().unwrap_or_default()
    }

    /// Freezes equal-mass cutpoints computed from scores of `texts`.
    pub fn calibrate<S: AsRef<str>>(&mut self, texts: &[S]) -> Result<()> {
        let scores: Vec<f64> = texts.iter().map(|t| self.score(t.as_ref())).collect();
        self.scale = Some(OrdinalScale::from_quantiles(&scores)?);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&ModelHeader {
            hyper: self.hyper.clone(),
            feature_spec: self.feature_spec.clone(),
            scale: self.scale.clone(),
            dim: self.weights.len(),
        })?;
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.weights.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.bias.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let take4 = |at: usize| -> Result<[u8; 4]> {
            bytes
                .get(at..at + 4)
                .map(|s| s.try_into().expect("4 bytes"))
                .ok_or_else(|| bad("truncated"))
        };
        if &take4(0)? != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take4(4)?);
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(take4(8)?) as usize;
        let header: ModelHeader = serde_json::from_slice(bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?)?;
        let start = 12 + hlen;
        if bytes.len() != start + 4 * header.dim + 4 {
            return Err(bad("weight section has the wrong size"));
        }
        let weights = bytes[start..start + 4 * header.dim]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let bias = f32::from_le_bytes(take4(start + 4 * header.dim)?);
        Ok(QualityModel {
            weights,
            bias,
            hyper: header.hyper,
            feature_spec: header.feature_spec,
            scale: header.scale,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Mini-batch SGD on the logistic loss with L2 decay. Examples are shuffled
/// each epoch by a ChaCha8 stream seeded from `hyper.rng_seed`; training is
/// single-threaded and bit-reproducible.
pub fn train_classifier<S: AsRef<str>>(pos: &[S], neg: &[S], hyper: &Hyper, hash_seed: u64) -> Result<QualityModel> {
    if pos.is_empty() {
        return Err(Error::EmptySeedSet("positive"));
    }
    if neg.is_empty() {
        return Err(Error::EmptySeedSet("negative"));
    }
    if hyper.batch_size == 0 || hyper.learning_rate <= 0.0 || hyper.l2_penalty < 0.0 {
        return Err(Error::Config("batch_size and learning_rate must be positive, l2_penalty >= 0".into()));
    }
    if hyper.learning_rate * hyper.l2_penalty >= 1.0 {
        return Err(Error::Config("learning_rate * l2_penalty must be < 1".into()));
    }

    let examples: Vec<(FeatureVector, f64)> = pos
        .iter()
        .map(|t| (featurize_with_seed(t.as_ref(), hash_seed), 1.0))
        .chain(neg.iter().map(|t| (featurize_with_seed(t.as_ref(), hash_seed), 0.0)))
        .collect();

    // w = scale * v keeps the per-step L2 decay O(1)
    let mut v = vec![0.0f64; FEATURE_DIM];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let mut grad: HashMap<u32, f64> = HashMap::new();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let lr = hyper.learning_rate / (1.0 + epoch as f64);
        let decay = 1.0 - lr * hyper.l2_penalty;
        let mut loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grad.clear();
            let mut grad_b = 0.0;
            for &i in batch {
                let (x, y) = &examples[i];
                let z: f64 = x.indices.iter().zip(&x.values).map(|(&j, &xv)| v[j as usize] * xv).sum::<f64>() * scale + bias;
                let p = sigmoid(z);
                loss += -(y * p.max(1e-300).ln() + (1.0 - y) * (1.0 - p).max(1e-300).ln());
                let g = p - y;
                for (&j, &xv) in x.indices.iter().zip(&x.values) {
                    *grad.entry(j).or_default() += g * xv;
                }
                grad_b += g;
            }
            let n = batch.len() as f64;
            scale *= decay;
            let step = lr / (n * scale);
            for (&j, &g) in &grad {
                v[j as usize] -= step * g;
            }
            bias -= lr * grad_b / n;
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                scale = 1.0;
            }
        }
        if !loss.is_finite() || !bias.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    let weights: Vec<f32> = v.iter().map(|x| (x * scale) as f32).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            epoch: hyper.epochs.saturating_sub(1),
        });
    }
    Ok(QualityModel {
        weights,
        bias: bias as f32,
        hyper: hyper.clone(),
        feature_spec: FeatureSpec::new(hash_seed),
        scale: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(prefix: &str, n: usize) -> Vec<String> {
        (0..n)
            .map(|i| (0..12).map(|k| format!("{prefix}{}", (i * 7 + k * 3) % 40)).collect::<Vec<_>>().join(" "))
            .collect()
    }

    #[test]
    fn empty_seed_sets() {
        let some = docs("a", 3);
        let none: Vec<String> = vec![];
        assert!(matches!(train_classifier(&none, &some, &Hyper::default(), 0), Err(Error::EmptySeedSet("positive"))));
        assert!(matches!(train_classifier(&some, &none, &Hyper::default(), 0), Err(Error::EmptySeedSet("negative"))));
    }

    #[test]
    fn identical_sets_score_near_half() {
        let d = docs("w", 50);
        let m = train_classifier(&d, &d, &Hyper::default(), 0).unwrap();
        for t in &d {
            assert!((m.score(t) - 0.5).abs() < 0.1, "{}", m.score(t));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let (p, n) = (docs("p", 40), docs("n", 40));
        let a = train_classifier(&p, &n, &Hyper::default(), 3).unwrap().to_bytes().unwrap();
        let b = train_classifier(&p, &n, &Hyper::default(), 3).unwrap().to_bytes().unwrap();
        assert_eq!(a, b);
        let c = train_classifier(&p, &n, &Hyper { rng_seed: 9, ..Hyper::default() }, 3).unwrap().to_bytes().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn file_round_trip() {
        let (p, n) = (docs("p", 20), docs("n", 20));
        let mut m = train_classifier(&p, &n, &Hyper::default(), 3).unwrap();
        m.calibrate(&p).unwrap();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"UDQM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = QualityModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.score(&p[0]), m.score(&p[0]));
    }

    #[test]
    fn corrupt_files_rejected() {
        let (p, n) = (docs("p", 5), docs("n", 5));
        let bytes = train_classifier(&p, &n, &Hyper::default(), 0).unwrap().to_bytes().unwrap();
        assert!(QualityModel::from_bytes(b"NOPE").is_err());
        assert!(QualityModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(QualityModel::from_bytes(&v2).is_err());
    }

    #[test]
    fn divergence_names_epoch() {
        let (p, n) = (docs("p", 5), docs("n", 5));
        let h = Hyper { learning_rate: f64::INFINITY, l2_penalty: 0.0, ..Hyper::default() };
        assert!(matches!(train_classifier(&p, &n, &h, 0), Err(Error::Divergence { epoch: 0 })));
    }

    #[test]
    fn empty_text_scores_sigmoid_bias() {
        let (p, n) = (docs("p", 30), docs("n", 10));
        let m = train_classifier(&p, &n, &Hyper::default(), 0).unwrap();
        assert_eq!(m.score(""), sigmoid(f64::from(m.bias)));
    }
}

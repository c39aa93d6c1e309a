//! L2 model-driven selection with a hashed bag-of-n-grams logistic model.

mod eval;
mod features;
mod model;
mod policy;
mod scale;

pub use eval::{evaluate_classifier, ClassifierMetrics};
pub use features::{featurize, featurize_with_seed, FeatureVector, FEATURE_BITS, FEATURE_DIM};
pub use model::{train_classifier, FeatureSpec, Hyper, QualityModel, MODEL_MAGIC, MODEL_VERSION};
pub use policy::{select, SelectPolicy, SelectReport, HISTOGRAM_BINS, OP_NAME};
pub use scale::{bucket_score, OrdinalScale};

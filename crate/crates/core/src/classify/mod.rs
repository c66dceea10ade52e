//! Binary classifiers, threshold selection, hyperparameter search and the
//! one-vs-all wrapper used for call motivators.

mod linear;
mod ova;
mod search;
mod threshold;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use linear::{fit_platt, train_linear_svm, train_logreg, LinearModel, LogregConfig, LogregTrace, Platt, SvmConfig};
pub use ova::{one_vs_all_train, FeatureView, OvaConfig, OvaResult, SelectedModel, SourceData};
pub use search::{fit_config, search, write_trial_log, Algorithm, AlgorithmSpace, ParamDist, SearchMode, SearchOutcome, SelectionPolicy, Trial};
pub use threshold::{choose_threshold, precision_recall, ThresholdChoice};
pub use tree::{train_adaboost, train_gbm, AdaBoostConfig, GbmConfig, Node, Stump, Tree, TreeEnsembleModel};

/// Data source a motivator model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    /// Call transcript.
    #[serde(rename = "CT")]
    Ct,
    /// Whisper plus rep-notes.
    #[serde(rename = "WSR")]
    Wsr,
    /// Clickstream.
    #[serde(rename = "CS")]
    Cs,
}

impl Source {
    /// Serialized stacking order.
    pub const ALL: [Source; 3] = [Source::Ct, Source::Wsr, Source::Cs];

    pub fn name(self) -> &'static str {
        match self {
            Source::Ct => "CT",
            Source::Wsr => "WSR",
            Source::Cs => "CS",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Per-row weights: inverse class frequency `n / (2 n_c)` when `balanced`,
/// otherwise 1. Either way they average to 1.
pub fn class_weights(y: &[bool], balanced: bool) -> Vec<f64> {
    let n = y.len() as f64;
    let pos = y.iter().filter(|v| **v).count() as f64;
    if !balanced || pos == 0.0 || pos == n {
        return vec![1.0; y.len()];
    }
    let (wp, wn) = (n / (2.0 * pos), n / (2.0 * (n - pos)));
    y.iter().map(|&v| if v { wp } else { wn }).collect()
}

pub(crate) fn check_training_data(x: &Matrix<f64>, y: &[bool]) -> Result<()> {
    if x.rows != y.len() {
        return Err(Error::DimensionMismatch { expected: x.rows, got: y.len() });
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::invalid("training labels contain a single class"));
    }
    if !x.is_finite() {
        return Err(Error::invalid("training features contain non-finite values"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Logreg(LinearModel),
    Svm(LinearModel),
    Gbm(TreeEnsembleModel),
    AdaBoost(TreeEnsembleModel),
}

/// A trained model plus its operating threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub model: ModelKind,
    pub threshold: f64,
    /// Identifier of the feature space the model was trained on.
    pub feature_space: String,
    pub n_features: usize,
}

impl BinaryClassifier {
    pub fn new(model: ModelKind, threshold: f64, feature_space: &str, n_features: usize) -> Self {
        Self { model, threshold: threshold.clamp(0.0, 1.0), feature_space: feature_space.to_string(), n_features }
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Result<Vec<f64>> {
        if x.cols != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.cols });
        }
        let p = match &self.model {
            ModelKind::Logreg(m) | ModelKind::Svm(m) => m.predict_proba(x),
            ModelKind::Gbm(m) | ModelKind::AdaBoost(m) => m.predict_proba(x),
        };
        Ok(p.into_iter().map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.5 }).collect())
    }

    /// Sets the threshold, clamped to `[0, 1]`.
    pub fn set_threshold(&mut self, t: f64) {
        self.threshold = t.clamp(0.0, 1.0);
    }

    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<bool>> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p >= self.threshold).collect())
    }
}

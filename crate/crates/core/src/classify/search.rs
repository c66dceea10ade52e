use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

use super::linear::{train_linear_svm, train_logreg, LogregConfig, SvmConfig};
use super::ova::FeatureView;
use super::threshold::choose_threshold;
use super::tree::{train_adaboost, train_gbm, AdaBoostConfig, GbmConfig};
use super::{BinaryClassifier, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Logreg,
    Svm,
    Gbm,
    #[serde(rename = "adaboost")]
    AdaBoost,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Logreg => "logreg",
            Algorithm::Svm => "svm",
            Algorithm::Gbm => "gbm",
            Algorithm::AdaBoost => "adaboost",
        }
    }

    fn param_names(self) -> &'static [&'static str] {
        match self {
            Algorithm::Logreg => &["lambda"],
            Algorithm::Svm => &["lambda", "epochs"],
            Algorithm::Gbm => &["rounds", "depth", "learning_rate", "l2"],
            Algorithm::AdaBoost => &["rounds"],
        }
    }

    /// Tree models split on raw coordinates and are only offered reduced
    /// (dense, low-dimensional) views.
    pub fn is_tree(self) -> bool {
        matches!(self, Algorithm::Gbm | Algorithm::AdaBoost)
    }
}

/// One hyperparameter's grid or sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ParamDist {
    Choice { values: Vec<f64> },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    IntRange { low: i64, high: i64 },
}

impl ParamDist {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match self {
            ParamDist::Choice { values } => *rng.choose(values),
            ParamDist::Uniform { low, high } => rng.uniform(*low, *high),
            ParamDist::LogUniform { low, high } => rng.uniform(low.ln(), high.ln()).exp(),
            ParamDist::IntRange { low, high } => (*low + rng.below((high - low + 1) as u64) as i64) as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ParamDist::Choice { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
            ParamDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            ParamDist::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low <= high,
            ParamDist::IntRange { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad parameter distribution {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchMode {
    /// Full Cartesian product of `choice` lists.
    Grid,
    Random { n_trials: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpace {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub mode: SearchMode,
    #[serde(default)]
    pub params: BTreeMap<String, ParamDist>,
}

impl AlgorithmSpace {
    pub fn validate(&self) -> Result<()> {
        for (k, d) in &self.params {
            if !self.algorithm.param_names().contains(&k.as_str()) {
                return Err(Error::invalid(format!("{} has no hyperparameter '{k}'", self.algorithm.name())));
            }
            d.validate()?;
            if self.mode == SearchMode::Grid && !matches!(d, ParamDist::Choice { .. }) {
                return Err(Error::invalid(format!("grid search needs explicit values for '{k}'")));
            }
        }
        if let SearchMode::Random { n_trials: 0 } = self.mode {
            return Err(Error::invalid("random search needs n_trials >= 1"));
        }
        Ok(())
    }

    /// Configurations in enumeration order. Random draws use the stream
    /// `derive(seed, draw)`.
    pub fn configurations(&self, seed: u64) -> Vec<BTreeMap<String, f64>> {
        match &self.mode {
            SearchMode::Grid => {
                let mut out = vec![BTreeMap::new()];
                for (k, d) in &self.params {
                    let ParamDist::Choice { values } = d else { continue };
                    out = out
                        .into_iter()
                        .flat_map(|cfg| {
                            values.iter().map(move |&v| {
                                let mut c = cfg.clone();
                                c.insert(k.clone(), v);
                                c
                            })
                        })
                        .collect();
                }
                out
            }
            SearchMode::Random { n_trials } => (0..*n_trials as u64)
                .map(|t| {
                    let mut rng = SplitMix64::new(SplitMix64::derive(seed, t));
                    self.params.iter().map(|(k, d)| (k.clone(), d.sample(&mut rng))).collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionPolicy {
    pub r_min: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self { r_min: 0.1 }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.r_min) {
            Ok(())
        } else {
            Err(Error::invalid("r_min must lie in [0, 1]"))
        }
    }

    /// Winner index and whether the recall floor was unmet by every trial.
    /// Feasible trials rank by precision, then recall, then the smaller
    /// config key; with none feasible, recall ranks first.
    pub fn select(&self, trials: &[Trial]) -> Option<(usize, bool)> {
        let feasible: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].recall >= self.r_min).collect();
        let unmet = feasible.is_empty();
        let pool: Vec<usize> = if unmet { (0..trials.len()).collect() } else { feasible };
        let key = |t: &Trial| if unmet { (t.recall, t.precision) } else { (t.precision, t.recall) };
        pool.into_iter()
            .reduce(|a, b| {
                let (ka, kb) = (key(&trials[a]), key(&trials[b]));
                let ord = kb.0.total_cmp(&ka.0).then(kb.1.total_cmp(&ka.1)).then(trials[a].config_key().cmp(&trials[b].config_key()));
                if ord.is_le() {
                    a
                } else {
                    b
                }
            })
            .map(|i| (i, unmet))
    }
}

/// One evaluated configuration. Scores are on the validation split at the
/// threshold chosen there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub algorithm: Algorithm,
    pub view: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Trial {
    /// Canonical text form, also used for the tie-break.
    pub fn config_key(&self) -> String {
        let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("algorithm={};view={};{}", self.algorithm.name(), self.view, p.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: BinaryClassifier,
    pub winner: usize,
    pub policy_unmet: bool,
    pub trials: Vec<Trial>,
    /// Winner's validation probabilities.
    pub val_proba: Vec<f64>,
}

/// Trains one configuration.
pub fn fit_config(algorithm: Algorithm, params: &BTreeMap<String, f64>, x: &Matrix<f64>, y: &[bool], balanced: bool, seed: u64) -> Result<ModelKind> {
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let count = |k: &str, d: usize| params.get(k).map_or(d, |v| v.round().max(1.0) as usize);
    Ok(match algorithm {
        Algorithm::Logreg => {
            let d = LogregConfig::default();
            ModelKind::Logreg(train_logreg(x, y, &LogregConfig { lambda: get("lambda", d.lambda), balanced, ..d })?.0)
        }
        Algorithm::Svm => {
            let d = SvmConfig::default();
            let cfg = SvmConfig { lambda: get("lambda", d.lambda), epochs: count("epochs", d.epochs), balanced, seed, ..d };
            ModelKind::Svm(train_linear_svm(x, y, &cfg)?)
        }
        Algorithm::Gbm => {
            let d = GbmConfig::default();
            let cfg = GbmConfig {
                rounds: count("rounds", d.rounds),
                depth: count("depth", d.depth),
                learning_rate: get("learning_rate", d.learning_rate),
                l2: get("l2", d.l2),
                balanced,
                ..d
            };
            ModelKind::Gbm(train_gbm(x, y, &cfg)?)
        }
        Algorithm::AdaBoost => ModelKind::AdaBoost(train_adaboost(x, y, &AdaBoostConfig { rounds: count("rounds", 50), balanced })?),
    })
}

/// Runs every configuration of every space on every compatible view,
/// training on the training split and scoring on validation.
pub fn search(
    spaces: &[AlgorithmSpace],
    views: &[FeatureView],
    y_train: &[bool],
    y_val: &[bool],
    policy: &SelectionPolicy,
    balanced: bool,
    seed: u64,
) -> Result<SearchOutcome> {
    policy.validate()?;
    if spaces.is_empty() || views.is_empty() {
        return Err(Error::invalid("search space is empty"));
    }
    for s in spaces {
        s.validate()?;
    }
    let mut trials = Vec::new();
    let mut best: Option<(BinaryClassifier, Vec<f64>)> = None;
    let mut winner = None;
    for view in views {
        if view.train.rows != y_train.len() || view.val.rows != y_val.len() {
            return Err(Error::DimensionMismatch { expected: y_train.len(), got: view.train.rows });
        }
        for (si, space) in spaces.iter().enumerate() {
            if space.algorithm.is_tree() && !view.reduced {
                continue;
            }
            for params in space.configurations(SplitMix64::derive(seed, 0x5eac_0000 + si as u64)) {
                let index = trials.len();
                let trial_seed = SplitMix64::derive(seed, index as u64);
                let model = fit_config(space.algorithm, &params, &view.train, y_train, balanced, trial_seed)?;
                let clf = BinaryClassifier::new(model, 0.5, &view.id, view.train.cols);
                let proba = clf.predict_proba(&view.val)?;
                let choice = choose_threshold(&proba, y_val, policy.r_min)?;
                let trial = Trial {
                    index,
                    algorithm: space.algorithm,
                    view: view.id.clone(),
                    params,
                    seed: trial_seed,
                    threshold: choice.threshold,
                    precision: choice.precision,
                    recall: choice.recall,
                };
                trials.push(trial);
                let (w, _) = policy.select(&trials).expect("non-empty");
                if winner != Some(w) {
                    let mut clf = clf;
                    clf.set_threshold(choice.threshold);
                    best = Some((clf, proba));
                    winner = Some(w);
                }
            }
        }
    }
    let (best, val_proba) = best.ok_or_else(|| Error::invalid("no view is compatible with the search space"))?;
    let (winner, policy_unmet) = policy.select(&trials).expect("non-empty");
    Ok(SearchOutcome { best, winner, policy_unmet, trials, val_proba })
}

/// Trial log as CSV: `trial,params,precision,recall`.
pub fn write_trial_log(path: &Path, trials: &[Trial]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "params", "precision", "recall"])?;
    for t in trials {
        w.write_record([t.index.to_string(), t.config_key(), t.precision.to_string(), t.recall.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(i: usize, p: f64, r: f64, lambda: f64) -> Trial {
        Trial {
            index: i,
            algorithm: Algorithm::Logreg,
            view: "v".into(),
            params: [("lambda".to_string(), lambda)].into(),
            seed: 0,
            threshold: 0.5,
            precision: p,
            recall: r,
        }
    }

    fn data(seed: u64) -> (FeatureView, Vec<bool>, Vec<bool>) {
        let mut rng = SplitMix64::new(seed);
        let mut make = |n: usize| {
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for i in 0..n {
                let pos = i % 4 == 0;
                let c = if pos { 1.0 } else { -0.3 };
                rows.push(vec![c + rng.normal(), rng.normal()]);
                y.push(pos);
            }
            (Matrix::from_rows(&rows).unwrap(), y)
        };
        let (train, yt) = make(120);
        let (val, yv) = make(60);
        (FeatureView { id: "v".into(), train, val, reduced: true }, yt, yv)
    }

    #[test]
    fn policy_respects_recall_floor() {
        let trials = vec![trial(0, 0.9, 0.05, 1.0), trial(1, 0.6, 0.3, 2.0)];
        assert_eq!(SelectionPolicy { r_min: 0.1 }.select(&trials), Some((1, false)));
        let trials = vec![trial(0, 0.9, 0.05, 1.0), trial(1, 0.6, 0.08, 2.0)];
        assert_eq!(SelectionPolicy { r_min: 0.1 }.select(&trials), Some((1, true)));
        // exact tie resolves to the smaller config key
        let trials = vec![trial(0, 0.7, 0.3, 2.0), trial(1, 0.7, 0.3, 1.0)];
        assert_eq!(SelectionPolicy::default().select(&trials), Some((1, false)));
    }

    #[test]
    fn grid_enumerates_cartesian_product() {
        let space = AlgorithmSpace {
            algorithm: Algorithm::Gbm,
            mode: SearchMode::Grid,
            params: [
                ("rounds".to_string(), ParamDist::Choice { values: vec![5.0, 10.0] }),
                ("depth".to_string(), ParamDist::Choice { values: vec![1.0, 2.0, 3.0] }),
            ]
            .into(),
        };
        let c = space.configurations(0);
        assert_eq!(c.len(), 6);
        let keys: std::collections::BTreeSet<String> = c.iter().map(|m| format!("{m:?}")).collect();
        assert_eq!(keys.len(), 6);
    }

    #[test]
    fn grid_of_one_wins() {
        let (view, yt, yv) = data(1);
        let space = AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), ParamDist::Choice { values: vec![0.1] })].into(),
        };
        let out = search(&[space], &[view], &yt, &yv, &SelectionPolicy::default(), true, 7).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.winner, 0);
        assert_eq!(out.best.threshold, out.trials[0].threshold);
    }

    #[test]
    fn winner_invariant_to_grid_order() {
        let (view, yt, yv) = data(2);
        let values = vec![1e-4, 1e-2, 1.0, 10.0];
        let mk = |v: Vec<f64>| AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), ParamDist::Choice { values: v })].into(),
        };
        let a = search(&[mk(values.clone())], std::slice::from_ref(&view), &yt, &yv, &SelectionPolicy::default(), true, 1).unwrap();
        let rev: Vec<f64> = values.into_iter().rev().collect();
        let b = search(&[mk(rev)], &[view], &yt, &yv, &SelectionPolicy::default(), true, 1).unwrap();
        assert_eq!(a.trials[a.winner].params, b.trials[b.winner].params);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn random_search_is_seeded() {
        let (view, yt, yv) = data(3);
        let space = AlgorithmSpace {
            algorithm: Algorithm::Svm,
            mode: SearchMode::Random { n_trials: 4 },
            params: [
                ("lambda".to_string(), ParamDist::LogUniform { low: 1e-4, high: 1e-1 }),
                ("epochs".to_string(), ParamDist::IntRange { low: 5, high: 10 }),
            ]
            .into(),
        };
        let run = |s| search(std::slice::from_ref(&space), std::slice::from_ref(&view), &yt, &yv, &SelectionPolicy::default(), true, s).unwrap();
        let (a, b) = (run(9), run(9));
        assert_eq!(a, b);
        assert_eq!(a.trials.len(), 4);
        assert!(a.trials.iter().all(|t| (5.0..=10.0).contains(&t.params["epochs"]) && t.params["epochs"].fract() == 0.0));
        assert_ne!(a.trials, run(10).trials);
    }

    #[test]
    fn validation_catches_bad_spaces() {
        let bad = AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("depth".to_string(), ParamDist::Choice { values: vec![1.0] })].into(),
        };
        assert!(bad.validate().is_err());
        let bad = AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), ParamDist::Uniform { low: 0.0, high: 1.0 })].into(),
        };
        assert!(bad.validate().is_err());
        assert!(SelectionPolicy { r_min: 1.5 }.validate().is_err());
    }

    #[test]
    fn trial_log_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trial_log(&p, &[trial(0, 0.5, 0.25, 0.1)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "trial,params,precision,recall\n0,algorithm=logreg;view=v;lambda=0.1,0.5,0.25\n");
    }
}

//! Per-motivator stacking over the CT, WSR and CS source models, with
//! fallback to the best single source.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, write_json};
use crate::classify::{
    choose_threshold, fit_config, train_logreg, BinaryClassifier, LinearModel, LogregConfig, OvaResult, SelectedModel,
    SelectionPolicy, Source, SourceData,
};
use crate::corpus::Motivator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

pub const REGISTRY_INDEX: &str = "index.json";
pub const MODEL_KIND: &str = "ensemble_model";
pub const INDEX_KIND: &str = "ensemble_index";

/// Feature matrices for a batch of calls, keyed by feature-view id, plus
/// per-source availability (order CT, WSR, CS).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub n: usize,
    pub views: BTreeMap<String, Matrix<f64>>,
    pub available: [Vec<bool>; 3],
}

impl FeatureBundle {
    /// Training (`val == false`) or validation rows of the given sources.
    pub fn from_sources(sources: &[SourceData], val: bool) -> Result<Self> {
        let n = sources
            .first()
            .map(|s| if val { s.val_available.len() } else { s.train_available.len() })
            .ok_or_else(|| Error::invalid("no sources"))?;
        let mut available = [vec![false; n], vec![false; n], vec![false; n]];
        let mut views = BTreeMap::new();
        for s in sources {
            available[s.source.index()] = if val { s.val_available.clone() } else { s.train_available.clone() };
            for v in &s.views {
                views.insert(v.id.clone(), if val { v.val.clone() } else { v.train.clone() });
            }
        }
        Ok(Self { n, views, available })
    }

    fn view(&self, id: &str) -> Result<&Matrix<f64>> {
        self.views.get(id).ok_or_else(|| Error::invalid(format!("feature view '{id}' missing from bundle")))
    }
}

/// Final model for one motivator. Exactly one of `stacker` and `fallback`
/// is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub motivator: Motivator,
    /// Always `[CT, WSR, CS]`; stacker weights follow this order.
    pub sources: Vec<Source>,
    pub source_models: Vec<Option<BinaryClassifier>>,
    /// Imputed probability per source for calls without that source.
    pub base_rates: Vec<f64>,
    pub stacker: Option<LinearModel>,
    pub fallback: Option<Source>,
    pub threshold: f64,
    pub val_precision: f64,
    pub val_recall: f64,
}

impl EnsembleModel {
    pub fn is_ensemble(&self) -> bool {
        self.stacker.is_some()
    }

    /// Winner label used in the registry index.
    pub fn winner(&self) -> String {
        match self.fallback {
            Some(s) => format!("fallback:{s}"),
            None => "ensemble".into(),
        }
    }

    /// Probability from one source, imputed where the source is missing.
    fn source_proba(&self, s: Source, bundle: &FeatureBundle) -> Result<Vec<f64>> {
        let k = s.index();
        let Some(clf) = &self.source_models[k] else {
            return Ok(vec![self.base_rates[k]; bundle.n]);
        };
        let p = clf.predict_proba(bundle.view(&clf.feature_space)?)?;
        Ok(p.into_iter().zip(&bundle.available[k]).map(|(p, &a)| if a { p } else { self.base_rates[k] }).collect())
    }

    /// Stacker inputs, one `[CT, WSR, CS]` row per call.
    pub fn stack_features(&self, bundle: &FeatureBundle) -> Result<Matrix<f64>> {
        let mut out = Matrix::zeros(bundle.n, 3);
        for s in Source::ALL {
            for (i, p) in self.source_proba(s, bundle)?.into_iter().enumerate() {
                out[(i, s.index())] = p;
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, bundle: &FeatureBundle) -> Result<Vec<f64>> {
        match (&self.stacker, self.fallback) {
            (Some(st), None) => Ok(st.predict_proba(&self.stack_features(bundle)?)),
            (None, Some(s)) => self.source_proba(s, bundle),
            _ => Err(Error::Format(format!("ensemble for {} must have exactly one of stacker/fallback", self.motivator))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub folds: usize,
    pub stacker_lambda: f64,
    pub balanced: bool,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { folds: 5, stacker_lambda: 1e-4, balanced: true, seed: 42 }
    }
}

/// Validation operating point of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `EM`, `CT`, `WSR` or `CS`.
    pub name: String,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Which training rows each out-of-fold prediction came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldBookkeeping {
    pub fold_of: Vec<usize>,
    /// Per source then per fold, rows the fold model was fitted on.
    pub fitted_on: Vec<Vec<Vec<usize>>>,
}

impl FoldBookkeeping {
    /// True when no row's stacker feature came from a model fitted on it.
    pub fn is_leak_free(&self) -> bool {
        self.fitted_on.iter().all(|per_fold| {
            per_fold.iter().enumerate().all(|(k, rows)| rows.iter().all(|&r| self.fold_of[r] != k))
        })
    }
}

/// Training record for one motivator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTraining {
    pub model: EnsembleModel,
    /// Ensemble first, then the usable sources in order.
    pub candidates: Vec<Candidate>,
    /// Validation probabilities per candidate, aligned with `candidates`.
    pub val_proba: Vec<Vec<f64>>,
    pub oof: FoldBookkeeping,
    pub usable_sources: usize,
}

impl EnsembleTraining {
    pub fn candidate(&self, name: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.name == name)
    }
}

fn subset_rows(m: &Matrix<f64>, rows: &[usize]) -> Matrix<f64> {
    let mut out = Matrix::zeros(rows.len(), m.cols);
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).copy_from_slice(m.row(r));
    }
    out
}

/// Out-of-fold probabilities of one selected source model over all
/// training rows. Unavailable rows get the model's base rate.
fn oof_predictions(
    sel: &SelectedModel,
    data: &SourceData,
    y: &[bool],
    fold_of: &[usize],
    folds: usize,
    balanced: bool,
) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
    let view = data
        .views
        .iter()
        .find(|v| v.id == sel.winner.view)
        .ok_or_else(|| Error::invalid(format!("view '{}' not found for {}", sel.winner.view, sel.source)))?;
    let n = y.len();
    let mut out = vec![sel.train_base_rate; n];
    let mut fitted_on = Vec::with_capacity(folds);
    for k in 0..folds {
        let fit: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k && data.train_available[i]).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k && data.train_available[i]).collect();
        let yk: Vec<bool> = fit.iter().map(|&i| y[i]).collect();
        let pos = yk.iter().filter(|v| **v).count();
        if !held.is_empty() {
            if pos == 0 || pos == yk.len() {
                let rate = if yk.is_empty() { sel.train_base_rate } else { pos as f64 / yk.len() as f64 };
                held.iter().for_each(|&i| out[i] = rate);
            } else {
                let model = fit_config(sel.winner.algorithm, &sel.winner.params, &subset_rows(&view.train, &fit), &yk, balanced, sel.winner.seed)?;
                let clf = BinaryClassifier::new(model, 0.5, &view.id, view.train.cols);
                for (&i, p) in held.iter().zip(clf.predict_proba(&subset_rows(&view.train, &held))?) {
                    out[i] = p;
                }
            }
        }
        fitted_on.push(fit);
    }
    Ok((out, fitted_on))
}

/// Trains the stacker for every motivator that has source models, and
/// picks ensemble or best single source on validation. Ties favour the
/// ensemble, then the earlier source.
pub fn train_ensembles(
    ova: &OvaResult,
    sources: &[SourceData],
    train_labels: &[Motivator],
    val_labels: &[Motivator],
    policy: &SelectionPolicy,
    config: &EnsembleConfig,
) -> Result<Vec<EnsembleTraining>> {
    policy.validate()?;
    if config.folds < 2 {
        return Err(Error::invalid("stacking needs at least 2 folds"));
    }
    let n = train_labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(SplitMix64::derive(config.seed, 0xf01d)).shuffle(&mut order);
    let mut fold_of = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        fold_of[i] = k % config.folds;
    }
    let val_bundle = FeatureBundle::from_sources(sources, true)?;
    let mut out = Vec::new();
    for m in Motivator::ALL {
        let selected: Vec<Option<&SelectedModel>> = Source::ALL.iter().map(|&s| ova.get(m, s)).collect();
        let usable = selected.iter().filter(|s| s.is_some()).count();
        if usable == 0 {
            continue;
        }
        let yt: Vec<bool> = train_labels.iter().map(|l| *l == m).collect();
        let yv: Vec<bool> = val_labels.iter().map(|l| *l == m).collect();
        if !yv.contains(&true) {
            log::warn!("motivator {m}: no validation positives; no final model");
            continue;
        }
        let prior = yt.iter().filter(|v| **v).count() as f64 / n.max(1) as f64;
        let base_rates: Vec<f64> = selected.iter().map(|s| s.map_or(prior, |s| s.train_base_rate)).collect();
        let mut model = EnsembleModel {
            motivator: m,
            sources: Source::ALL.to_vec(),
            source_models: selected.iter().map(|s| s.map(|s| s.classifier.clone())).collect(),
            base_rates,
            stacker: None,
            fallback: None,
            threshold: 0.5,
            val_precision: 0.0,
            val_recall: 0.0,
        };
        let mut candidates = Vec::new();
        let mut val_proba = Vec::new();
        let mut oof = FoldBookkeeping { fold_of: fold_of.clone(), fitted_on: Vec::new() };
        if usable >= 2 {
            let mut z = Matrix::from_vec(n, 3, vec![0.0; n * 3])?;
            for s in Source::ALL {
                let k = s.index();
                let col = match selected[k] {
                    Some(sel) => {
                        let data = sources.iter().find(|d| d.source == s).ok_or_else(|| Error::invalid(format!("no data for {s}")))?;
                        let (p, fitted) = oof_predictions(sel, data, &yt, &fold_of, config.folds, config.balanced)?;
                        oof.fitted_on.push(fitted);
                        p
                    }
                    None => vec![model.base_rates[k]; n],
                };
                for (i, p) in col.into_iter().enumerate() {
                    z[(i, k)] = p;
                }
            }
            let cfg = LogregConfig { lambda: config.stacker_lambda, balanced: config.balanced, ..LogregConfig::default() };
            let (stacker, _) = train_logreg(&z, &yt, &cfg)?;
            model.stacker = Some(stacker);
            let p = model.predict_proba(&val_bundle)?;
            let c = choose_threshold(&p, &yv, policy.r_min)?;
            candidates.push(Candidate { name: "EM".into(), threshold: c.threshold, precision: c.precision, recall: c.recall });
            val_proba.push(p);
        }
        for s in Source::ALL {
            if selected[s.index()].is_none() {
                continue;
            }
            let p = model.source_proba(s, &val_bundle)?;
            let c = choose_threshold(&p, &yv, policy.r_min)?;
            candidates.push(Candidate { name: s.name().into(), threshold: c.threshold, precision: c.precision, recall: c.recall });
            val_proba.push(p);
        }
        let win = select_candidate(&candidates, policy);
        let w = &candidates[win];
        if w.name != "EM" {
            model.stacker = None;
            model.fallback = Source::ALL.into_iter().find(|s| s.name() == w.name);
        }
        model.threshold = w.threshold;
        model.val_precision = w.precision;
        model.val_recall = w.recall;
        out.push(EnsembleTraining { model, candidates, val_proba, oof, usable_sources: usable });
    }
    Ok(out)
}

/// Index of the policy winner; earlier candidates win exact ties.
pub fn select_candidate(candidates: &[Candidate], policy: &SelectionPolicy) -> usize {
    let feasible = candidates.iter().any(|c| c.recall >= policy.r_min);
    let key = |c: &Candidate| {
        if feasible {
            (c.recall >= policy.r_min, c.precision, c.recall)
        } else {
            (true, c.recall, c.precision)
        }
    };
    let mut best = 0;
    for i in 1..candidates.len() {
        let (a, b) = (key(&candidates[i]), key(&candidates[best]));
        if a.0 && (!b.0 || a.1 > b.1 || (a.1 == b.1 && a.2 > b.2)) {
            best = i;
        }
    }
    best
}

/// Output of [`predict_motivators`] for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivatorPrediction {
    /// Indexed like [`Motivator::ALL`]; `None` when no model is available.
    pub probabilities: Vec<Option<f64>>,
    pub decisions: Vec<Option<bool>>,
    pub top: Option<Motivator>,
    /// No motivator cleared its threshold.
    pub low_confidence: bool,
}

/// Applies every final model to every call in the bundle.
pub fn predict_motivators(models: &[EnsembleModel], bundle: &FeatureBundle) -> Result<Vec<MotivatorPrediction>> {
    let mut probs: Vec<Vec<Option<f64>>> = vec![vec![None; 12]; bundle.n];
    let mut thresholds = [f64::NAN; 12];
    for m in models {
        let k = m.motivator.index();
        thresholds[k] = m.threshold;
        for (i, p) in m.predict_proba(bundle)?.into_iter().enumerate() {
            probs[i][k] = Some(p);
        }
    }
    Ok(probs
        .into_iter()
        .map(|p| {
            let decisions: Vec<Option<bool>> = p.iter().enumerate().map(|(k, v)| v.map(|v| v >= thresholds[k])).collect();
            let top = p
                .iter()
                .enumerate()
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((k, v)),
                })
                .map(|(k, _)| Motivator::ALL[k]);
            let low_confidence = !decisions.contains(&Some(true));
            MotivatorPrediction { probabilities: p, decisions, top, low_confidence }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub motivator: Motivator,
    pub file: String,
    pub sha256: String,
    pub winner: String,
    pub val_precision: f64,
    pub val_recall: f64,
}

/// Writes `<motivator>.json` per model and the index; returns the index.
pub fn write_registry(dir: &Path, models: &[EnsembleModel]) -> Result<Vec<RegistryEntry>> {
    let mut index = Vec::new();
    for m in models {
        let file = format!("{}.json", m.motivator.name());
        let sha256 = write_json(&dir.join(&file), MODEL_KIND, m)?;
        index.push(RegistryEntry {
            motivator: m.motivator,
            file,
            sha256,
            winner: m.winner(),
            val_precision: m.val_precision,
            val_recall: m.val_recall,
        });
    }
    write_json(&dir.join(REGISTRY_INDEX), INDEX_KIND, &index)?;
    Ok(index)
}

/// Loads every model listed in the index, checking file hashes.
pub fn read_registry(dir: &Path) -> Result<Vec<EnsembleModel>> {
    let index: Vec<RegistryEntry> = read_json(&dir.join(REGISTRY_INDEX), INDEX_KIND)?;
    index
        .iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let h = crate::artifact::hash_file(&path)?;
            if h != e.sha256 {
                return Err(Error::Format(format!("{} does not match its registry hash", path.display())));
            }
            read_json(&path, MODEL_KIND)
        })
        .collect()
}

#[cfg(test)]
mod tests;

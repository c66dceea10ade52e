use serde::{Deserialize, Serialize};

use crate::corpus::Motivator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

use super::search::{search, AlgorithmSpace, SelectionPolicy, Trial};
use super::{BinaryClassifier, Source};

/// One feature pipeline's output for a source, aligned with the split rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    pub id: String,
    pub train: Matrix<f64>,
    pub val: Matrix<f64>,
    /// Dense low-dimensional output of a reducer (eligible for tree models).
    pub reduced: bool,
}

/// Everything known about one source for the train/validation splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceData {
    pub source: Source,
    pub views: Vec<FeatureView>,
    /// Rows that actually have data for this source.
    pub train_available: Vec<bool>,
    pub val_available: Vec<bool>,
}

impl SourceData {
    fn check(&self, n_train: usize, n_val: usize) -> Result<()> {
        if self.train_available.len() != n_train || self.val_available.len() != n_val {
            return Err(Error::DimensionMismatch { expected: n_train, got: self.train_available.len() });
        }
        for v in &self.views {
            if v.train.rows != n_train || v.val.rows != n_val {
                return Err(Error::DimensionMismatch { expected: n_train, got: v.train.rows });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaConfig {
    pub spaces: Vec<AlgorithmSpace>,
    pub policy: SelectionPolicy,
    /// Inverse-frequency class weights.
    pub balanced: bool,
    pub seed: u64,
}

/// Winning model for one (motivator, source) pair plus its search record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedModel {
    pub motivator: Motivator,
    pub source: Source,
    pub classifier: BinaryClassifier,
    pub winner: Trial,
    pub policy_unmet: bool,
    pub trials: Vec<Trial>,
    /// Weighted-free positive rate among available training rows.
    pub train_base_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaResult {
    /// Sorted by motivator, then source.
    pub models: Vec<SelectedModel>,
    pub skipped: Vec<Motivator>,
}

impl OvaResult {
    pub fn get(&self, m: Motivator, s: Source) -> Option<&SelectedModel> {
        self.models.iter().find(|x| x.motivator == m && x.source == s)
    }
}

fn subset(m: &Matrix<f64>, rows: &[usize]) -> Matrix<f64> {
    let mut out = Matrix::zeros(rows.len(), m.cols);
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).copy_from_slice(m.row(r));
    }
    out
}

fn rows_where(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

/// Trains the 1-vs-all models: for each motivator and source, searches
/// every view × algorithm configuration and keeps the policy winner.
/// Search uses only rows where the source is available.
pub fn one_vs_all_train(
    sources: &[SourceData],
    train_labels: &[Motivator],
    val_labels: &[Motivator],
    motivators: &[Motivator],
    config: &OvaConfig,
) -> Result<OvaResult> {
    config.policy.validate()?;
    for s in sources {
        s.check(train_labels.len(), val_labels.len())?;
    }
    // restrict each source's views to available rows once
    let restricted: Vec<(Vec<usize>, Vec<usize>, Vec<FeatureView>)> = sources
        .iter()
        .map(|s| {
            let (tr, va) = (rows_where(&s.train_available), rows_where(&s.val_available));
            let views = s
                .views
                .iter()
                .map(|v| FeatureView { id: v.id.clone(), train: subset(&v.train, &tr), val: subset(&v.val, &va), reduced: v.reduced })
                .collect();
            (tr, va, views)
        })
        .collect();
    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for &m in motivators {
        if !train_labels.contains(&m) {
            log::warn!("motivator {} has no training examples; skipped", m.name());
            skipped.push(m);
            continue;
        }
        for (s, (tr, va, views)) in sources.iter().zip(&restricted) {
            let yt: Vec<bool> = tr.iter().map(|&i| train_labels[i] == m).collect();
            let yv: Vec<bool> = va.iter().map(|&i| val_labels[i] == m).collect();
            let pos = yt.iter().filter(|v| **v).count();
            if pos == 0 || pos == yt.len() || !yv.contains(&true) {
                log::warn!("motivator {} on {}: a split lacks positives or negatives; no model", m.name(), s.source);
                continue;
            }
            let seed = SplitMix64::derive(config.seed, (m.index() as u64) << 8 | s.source.index() as u64);
            let out = search(&config.spaces, views, &yt, &yv, &config.policy, config.balanced, seed)?;
            models.push(SelectedModel {
                motivator: m,
                source: s.source,
                classifier: out.best,
                winner: out.trials[out.winner].clone(),
                policy_unmet: out.policy_unmet,
                trials: out.trials,
                train_base_rate: pos as f64 / yt.len() as f64,
            });
        }
    }
    Ok(OvaResult { models, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::search::{Algorithm, ParamDist, SearchMode};

    /// Two-feature planted data: class k shifts feature k mod 2 by ±2.
    fn planted(n: usize, seed: u64, classes: &[Motivator]) -> (Matrix<f64>, Vec<Motivator>) {
        let mut rng = SplitMix64::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let m = classes[i % classes.len()];
            let mut r = vec![0.3 * rng.normal(); 3];
            r[m.index() % 3] += 3.0;
            rows.push(r);
            y.push(m);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn config() -> OvaConfig {
        OvaConfig {
            spaces: vec![AlgorithmSpace {
                algorithm: Algorithm::Logreg,
                mode: SearchMode::Grid,
                params: [("lambda".to_string(), ParamDist::Choice { values: vec![1e-3, 1e-1] })].into(),
            }],
            policy: SelectionPolicy::default(),
            balanced: true,
            seed: 5,
        }
    }

    #[test]
    fn trains_every_pair_and_skips_absent() {
        let classes = [Motivator::M1, Motivator::M2, Motivator::M3];
        let (xt, yt) = planted(90, 1, &classes);
        let (xv, yv) = planted(45, 2, &classes);
        let src = |s| SourceData {
            source: s,
            views: vec![FeatureView { id: "dense".into(), train: xt.clone(), val: xv.clone(), reduced: true }],
            train_available: vec![true; 90],
            val_available: vec![true; 45],
        };
        let sources = vec![src(Source::Ct), src(Source::Cs)];
        let motivators = [Motivator::M1, Motivator::M2, Motivator::M3, Motivator::M4];
        let out = one_vs_all_train(&sources, &yt, &yv, &motivators, &config()).unwrap();
        assert_eq!(out.skipped, vec![Motivator::M4]);
        assert_eq!(out.models.len(), 6);
        for m in &out.models {
            assert_eq!(m.trials.len(), 2);
            assert!(m.winner.precision >= 0.8);
            assert!((m.train_base_rate - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(out.get(Motivator::M2, Source::Cs).is_some());
    }

    #[test]
    fn unavailable_rows_are_excluded() {
        let classes = [Motivator::M1, Motivator::M2];
        let (xt, yt) = planted(60, 3, &classes);
        let (xv, yv) = planted(30, 4, &classes);
        let mut avail = vec![true; 60];
        avail[0] = false;
        avail[2] = false;
        let sources = vec![SourceData {
            source: Source::Cs,
            views: vec![FeatureView { id: "d".into(), train: xt, val: xv, reduced: true }],
            train_available: avail,
            val_available: vec![true; 30],
        }];
        let out = one_vs_all_train(&sources, &yt, &yv, &[Motivator::M1], &config()).unwrap();
        assert!((out.models[0].train_base_rate - 28.0 / 58.0).abs() < 1e-12);
    }
}

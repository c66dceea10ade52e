//! Motivator feature pipelines: per-source documents, fitted feature views
//! (vectorizer, optional reducer, column scaling), and the end-to-end
//! 1-vs-all + stacking run.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classify::{
    one_vs_all_train, Algorithm, AlgorithmSpace, FeatureView, OvaConfig, OvaResult, ParamDist, SearchMode, SelectionPolicy,
    Source, SourceData,
};
use crate::corpus::{CallRecord, ClickEvent, Motivator};
use crate::ensemble::{train_ensembles, EnsembleConfig, EnsembleTraining, FeatureBundle};
use crate::error::{Error, Result};
use crate::features::{
    fit_vectorizer, window_features, ClickFeatureVector, ClickFeaturizer, VectorizerConfig, VectorizerMode, VectorizerModel,
    DEFAULT_SESSION_GAP_S,
};
use crate::linalg::Matrix;
use crate::normalize::{tokenize, Normalizer, PreprocessOptions};
use crate::reduce::{densify, fit_lda, fit_pca, lda_transform, LdaConfig, LdaModel, PcaModel, DEFAULT_DENSIFY_CAP};

/// Per-call inputs of the three sources.
#[derive(Debug, Clone, PartialEq)]
pub struct CallDocs {
    pub ct: Vec<Vec<String>>,
    pub wsr: Vec<Vec<String>>,
    pub clicks: Vec<ClickFeatureVector>,
    /// Indexed by [`Source::index`].
    pub available: [Vec<bool>; 3],
}

impl CallDocs {
    pub fn len(&self) -> usize {
        self.ct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ct.is_empty()
    }
}

/// Builds source documents. CT is the cleaned transcript, WSR the whisper
/// followed by the cleaned rep-note, CS the click windows around the call.
pub fn prepare_docs(calls: &[CallRecord], clicks: &[ClickEvent], norm: &Normalizer, opts: PreprocessOptions, gap_s: i64) -> CallDocs {
    let mut by_customer: HashMap<&str, Vec<ClickEvent>> = HashMap::new();
    for e in clicks {
        by_customer.entry(e.customer_id.as_str()).or_default().push(e.clone());
    }
    let mut docs = CallDocs { ct: Vec::new(), wsr: Vec::new(), clicks: Vec::new(), available: [Vec::new(), Vec::new(), Vec::new()] };
    for c in calls {
        let ct = norm.motivator_preprocess(&norm.normalize_transcript(&c.transcript()), opts);
        let mut wsr = c.whisper.as_deref().map(|w| norm.motivator_preprocess(w, opts)).unwrap_or_default();
        if let Some(r) = &c.repnote {
            wsr.extend(norm.motivator_preprocess(&norm.normalize_repnote(r), opts));
        }
        let f = c
            .customer_id
            .as_deref()
            .and_then(|id| by_customer.get(id))
            .map(|evs| window_features(evs, c.call_start, c.call_end, gap_s))
            .unwrap_or_default();
        docs.available[0].push(!ct.is_empty());
        docs.available[1].push(!wsr.is_empty());
        docs.available[2].push(f.has_activity());
        docs.ct.push(ct);
        docs.wsr.push(wsr);
        docs.clicks.push(f);
    }
    docs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReducerSpec {
    None,
    Pca { components: usize },
    Lda { topics: usize, iterations: usize },
}

/// One text feature view: vectorizer plus optional reducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextViewSpec {
    pub id: String,
    pub vectorizer: VectorizerConfig,
    pub reducer: ReducerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub ct: Vec<TextViewSpec>,
    pub wsr: Vec<TextViewSpec>,
    pub session_gap_s: i64,
    pub preprocess: PreprocessOptions,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let tfidf = |ngram_max, max_features| VectorizerConfig { mode: VectorizerMode::Tfidf, ngram_max, min_df: 2, max_features };
        Self {
            ct: vec![
                TextViewSpec { id: "ct-tfidf-uni".into(), vectorizer: tfidf(1, Some(2000)), reducer: ReducerSpec::None },
                TextViewSpec { id: "ct-tfidf-bi-pca".into(), vectorizer: tfidf(2, Some(5000)), reducer: ReducerSpec::Pca { components: 100 } },
            ],
            wsr: vec![TextViewSpec { id: "wsr-tfidf-bi".into(), vectorizer: tfidf(2, Some(2000)), reducer: ReducerSpec::None }],
            session_gap_s: DEFAULT_SESSION_GAP_S,
            preprocess: PreprocessOptions::default(),
        }
    }
}

/// Column standardization fitted on training rows. Constant columns keep
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix<f64>) -> Self {
        let n = x.rows.max(1) as f64;
        let mut mean = vec![0.0; x.cols];
        for i in 0..x.rows {
            mean.iter_mut().zip(x.row(i)).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols];
        for i in 0..x.rows {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let scale = var.into_iter().map(|v| if v / n > 1e-24 { (v / n).sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &mut Matrix<f64>) {
        for i in 0..x.rows {
            for (j, v) in x.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reducer {
    None,
    Pca(PcaModel<f64>),
    Lda(LdaModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewModel {
    Text { vectorizer: VectorizerModel, reducer: Reducer },
    Clicks { featurizer: ClickFeaturizer },
}

/// A fitted feature view: raw call documents to a scaled dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPipeline {
    pub id: String,
    pub source: Source,
    pub model: ViewModel,
    pub scaler: Scaler,
}

impl ViewPipeline {
    /// Eligible for tree models.
    pub fn is_reduced(&self) -> bool {
        !matches!(self.model, ViewModel::Text { reducer: Reducer::None, .. })
    }

    fn raw(&self, docs: &CallDocs) -> Result<Matrix<f64>> {
        match &self.model {
            ViewModel::Text { vectorizer, reducer } => {
                let text = if self.source == Source::Ct { &docs.ct } else { &docs.wsr };
                let sparse = vectorizer.transform(text);
                match reducer {
                    Reducer::None => densify(&sparse, DEFAULT_DENSIFY_CAP),
                    Reducer::Pca(p) => p.transform_sparse(&sparse),
                    Reducer::Lda(l) => lda_transform(l, &sparse),
                }
            }
            ViewModel::Clicks { featurizer } => {
                let rows: Vec<Vec<f64>> = docs.clicks.iter().map(|f| featurizer.vectorize(f)).collect();
                if rows.is_empty() {
                    return Ok(Matrix::zeros(0, featurizer.dim()));
                }
                Matrix::from_rows(&rows)
            }
        }
    }

    pub fn transform(&self, docs: &CallDocs) -> Result<Matrix<f64>> {
        let mut x = self.raw(docs)?;
        self.scaler.apply(&mut x);
        Ok(x)
    }
}

fn fit_text_view(source: Source, spec: &TextViewSpec, docs: &CallDocs, seed: u64) -> Result<ViewPipeline> {
    let text = if source == Source::Ct { &docs.ct } else { &docs.wsr };
    let avail: Vec<Vec<String>> = text.iter().zip(&docs.available[source.index()]).filter(|(_, &a)| a).map(|(d, _)| d.clone()).collect();
    let vectorizer = fit_vectorizer(&avail, &spec.vectorizer)?;
    let sparse = vectorizer.transform(&avail);
    let reducer = match &spec.reducer {
        ReducerSpec::None => Reducer::None,
        ReducerSpec::Pca { components } => {
            let dense: Matrix<f64> = densify(&sparse, DEFAULT_DENSIFY_CAP)?;
            let k = (*components).min(dense.rows).min(dense.cols);
            Reducer::Pca(fit_pca(&dense, k)?)
        }
        ReducerSpec::Lda { topics, iterations } => {
            if spec.vectorizer.mode != VectorizerMode::Count {
                return Err(Error::invalid(format!("view '{}': LDA needs count features", spec.id)));
            }
            let cfg = LdaConfig { n_topics: *topics, iterations: *iterations, seed, ..LdaConfig::default() };
            Reducer::Lda(fit_lda(&sparse, &cfg)?)
        }
    };
    let mut view = ViewPipeline {
        id: spec.id.clone(),
        source,
        model: ViewModel::Text { vectorizer, reducer },
        scaler: Scaler { mean: Vec::new(), scale: Vec::new() },
    };
    let raw = view.raw(docs)?;
    view.scaler = Scaler::fit(&select_rows(&raw, &docs.available[source.index()]));
    Ok(view)
}

fn select_rows(x: &Matrix<f64>, mask: &[bool]) -> Matrix<f64> {
    let rows: Vec<Vec<f64>> = (0..x.rows).filter(|&i| mask[i]).map(|i| x.row(i).to_vec()).collect();
    if rows.is_empty() {
        Matrix::zeros(0, x.cols)
    } else {
        Matrix::from_rows(&rows).expect("equal widths")
    }
}

/// Fits every configured view on the training documents (rows where the
/// source is available).
pub fn fit_views(config: &FeatureConfig, train: &CallDocs, seed: u64) -> Result<Vec<ViewPipeline>> {
    let mut views = Vec::new();
    for spec in &config.ct {
        views.push(fit_text_view(Source::Ct, spec, train, seed)?);
    }
    for spec in &config.wsr {
        views.push(fit_text_view(Source::Wsr, spec, train, seed)?);
    }
    let active: Vec<ClickFeatureVector> =
        train.clicks.iter().zip(&train.available[2]).filter(|(_, &a)| a).map(|(f, _)| f.clone()).collect();
    let mut cs = ViewPipeline {
        id: "cs-clicks".into(),
        source: Source::Cs,
        model: ViewModel::Clicks { featurizer: ClickFeaturizer::fit(&active) },
        scaler: Scaler { mean: Vec::new(), scale: Vec::new() },
    };
    let raw = cs.raw(train)?;
    cs.scaler = Scaler::fit(&select_rows(&raw, &train.available[2]));
    views.push(cs);
    let mut ids: Vec<&str> = views.iter().map(|v| v.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("feature view ids must be unique"));
    }
    Ok(views)
}

/// Per-source training/validation data for the classifiers.
pub fn source_data(views: &[ViewPipeline], train: &CallDocs, val: &CallDocs) -> Result<Vec<SourceData>> {
    let mut out = Vec::new();
    for s in Source::ALL {
        let mut fv = Vec::new();
        for v in views.iter().filter(|v| v.source == s) {
            fv.push(FeatureView { id: v.id.clone(), train: v.transform(train)?, val: v.transform(val)?, reduced: v.is_reduced() });
        }
        if fv.is_empty() {
            continue;
        }
        out.push(SourceData {
            source: s,
            views: fv,
            train_available: train.available[s.index()].clone(),
            val_available: val.available[s.index()].clone(),
        });
    }
    Ok(out)
}

/// Feature bundle for prediction with the final models.
pub fn bundle(views: &[ViewPipeline], docs: &CallDocs) -> Result<FeatureBundle> {
    let mut out = FeatureBundle { n: docs.len(), views: Default::default(), available: docs.available.clone() };
    for v in views {
        out.views.insert(v.id.clone(), v.transform(docs)?);
    }
    Ok(out)
}

/// Search spaces used when the configuration does not list any.
pub fn default_spaces() -> Vec<AlgorithmSpace> {
    let choice = |v: &[f64]| ParamDist::Choice { values: v.to_vec() };
    vec![
        AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Random { n_trials: 8 },
            params: [("lambda".to_string(), ParamDist::LogUniform { low: 1e-5, high: 1.0 })].into(),
        },
        AlgorithmSpace {
            algorithm: Algorithm::Svm,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), choice(&[1e-4, 1e-3]))].into(),
        },
        AlgorithmSpace {
            algorithm: Algorithm::Gbm,
            mode: SearchMode::Grid,
            params: [("rounds".to_string(), choice(&[100.0])), ("depth".to_string(), choice(&[3.0])), ("learning_rate".to_string(), choice(&[0.1]))]
                .into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotivatorConfig {
    pub features: FeatureConfig,
    pub spaces: Vec<AlgorithmSpace>,
    pub policy: SelectionPolicy,
    pub ensemble: EnsembleConfig,
    pub seed: u64,
}

impl Default for MotivatorConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            spaces: default_spaces(),
            policy: SelectionPolicy::default(),
            ensemble: EnsembleConfig::default(),
            seed: 42,
        }
    }
}

/// Everything produced by [`run_motivator_pipeline`].
#[derive(Debug, Clone)]
pub struct MotivatorRun {
    pub views: Vec<ViewPipeline>,
    pub ova: OvaResult,
    pub ensembles: Vec<EnsembleTraining>,
    pub val_labels: Vec<Motivator>,
}

/// Motivator label per call; unlabelled calls are an error.
pub fn motivator_labels(calls: &[CallRecord]) -> Result<Vec<Motivator>> {
    calls
        .iter()
        .map(|c| c.motivator.ok_or_else(|| Error::invalid(format!("call {} has no motivator label", c.call_id))))
        .collect()
}

/// Features, 1-vs-all source models and stacking ensembles, end to end.
pub fn run_motivator_pipeline(
    train: &[CallRecord],
    val: &[CallRecord],
    clicks: &[ClickEvent],
    norm: &Normalizer,
    config: &MotivatorConfig,
) -> Result<MotivatorRun> {
    let (yt, yv) = (motivator_labels(train)?, motivator_labels(val)?);
    let f = &config.features;
    let dt = prepare_docs(train, clicks, norm, f.preprocess, f.session_gap_s);
    let dv = prepare_docs(val, clicks, norm, f.preprocess, f.session_gap_s);
    let views = fit_views(f, &dt, config.seed)?;
    let sources = source_data(&views, &dt, &dv)?;
    let ova_cfg = OvaConfig { spaces: config.spaces.clone(), policy: config.policy, balanced: true, seed: config.seed };
    let ova = one_vs_all_train(&sources, &yt, &yv, &Motivator::ALL, &ova_cfg)?;
    let ensembles = train_ensembles(&ova, &sources, &yt, &yv, &config.policy, &config.ensemble)?;
    Ok(MotivatorRun { views, ova, ensembles, val_labels: yv })
}

/// Whitespace tokens of a normalized text (used for intents and ROUGE).
pub fn tokens(text: &str) -> Vec<String> {
    tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, split_train_validation, SplitSpec, SynthConfig};
    use crate::normalize::Resources;

    fn small_config() -> MotivatorConfig {
        let mut c = MotivatorConfig::default();
        c.features.ct.truncate(1);
        c.spaces = vec![AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), ParamDist::Choice { values: vec![1e-3] })].into(),
        }];
        c
    }

    #[test]
    fn docs_and_views_line_up() {
        let (calls, clicks) = generate_synthetic_corpus(&SynthConfig { n_calls: 200, ..SynthConfig::default() }, 3).unwrap();
        let norm = Normalizer::new(Resources::default()).unwrap();
        let docs = prepare_docs(&calls, &clicks, &norm, PreprocessOptions::default(), DEFAULT_SESSION_GAP_S);
        assert_eq!(docs.len(), 200);
        assert!(docs.available[0].iter().all(|a| *a));
        let cs_rate = docs.available[2].iter().filter(|a| **a).count() as f64 / 200.0;
        assert!(cs_rate > 0.5 && cs_rate < 1.0, "{cs_rate}");
        let views = fit_views(&FeatureConfig::default(), &docs, 1).unwrap();
        assert_eq!(views.len(), 4);
        for v in &views {
            let x = v.transform(&docs).unwrap();
            assert_eq!(x.rows, 200);
            assert!(x.is_finite());
        }
        assert!(views[1].is_reduced() && !views[0].is_reduced() && views[3].is_reduced());
    }

    #[test]
    fn small_end_to_end_run() {
        let (calls, clicks) = generate_synthetic_corpus(&SynthConfig { n_calls: 600, ..SynthConfig::default() }, 5).unwrap();
        let (train, val) = split_train_validation(&calls, &SplitSpec::default()).unwrap();
        let norm = Normalizer::new(Resources::default()).unwrap();
        let run = run_motivator_pipeline(&train, &val, &clicks, &norm, &small_config()).unwrap();
        assert!(run.ova.models.len() >= 24);
        assert!(!run.ensembles.is_empty());
        let m1 = run.ensembles.iter().find(|e| e.model.motivator == Motivator::M1).unwrap();
        assert!(m1.model.val_precision >= 0.8);
        let dv = prepare_docs(&val, &clicks, &norm, PreprocessOptions::default(), DEFAULT_SESSION_GAP_S);
        let b = bundle(&run.views, &dv).unwrap();
        let models: Vec<_> = run.ensembles.iter().map(|e| e.model.clone()).collect();
        let preds = crate::ensemble::predict_motivators(&models, &b).unwrap();
        let hits = preds.iter().zip(&run.val_labels).filter(|(p, l)| p.top == Some(**l)).count();
        assert!(hits as f64 / preds.len() as f64 > 0.6);
    }
}

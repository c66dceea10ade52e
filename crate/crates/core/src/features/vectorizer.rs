use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorizerMode {
    Count,
    Binary,
    Tfidf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizerConfig {
    pub mode: VectorizerMode,
    /// 1 for unigrams, 2 for unigrams + bigrams.
    pub ngram_max: usize,
    pub min_df: usize,
    /// Keep only the most frequent terms (by document frequency).
    pub max_features: Option<usize>,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self {
            mode: VectorizerMode::Tfidf,
            ngram_max: 1,
            min_df: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerModel {
    pub mode: VectorizerMode,
    pub ngram_max: usize,
    pub min_df: usize,
    /// Sorted lexicographically; the position is the column index.
    pub terms: Vec<String>,
    /// Present iff `mode == Tfidf`.
    pub idf: Option<Vec<f64>>,
}

/// Unigrams, plus underscore-joined bigrams when `n_max >= 2`.
pub fn ngrams(doc: &[String], n_max: usize) -> Vec<String> {
    let mut out: Vec<String> = doc.to_vec();
    if n_max >= 2 {
        out.extend(doc.windows(2).map(|w| format!("{}_{}", w[0], w[1])));
    }
    out
}

pub fn fit_vectorizer(docs: &[Vec<String>], config: &VectorizerConfig) -> Result<VectorizerModel> {
    if !(1..=2).contains(&config.ngram_max) {
        return Err(Error::invalid(format!("ngram_max must be 1 or 2, got {}", config.ngram_max)));
    }
    if docs.is_empty() || docs.iter().all(Vec::is_empty) {
        return Err(Error::invalid("cannot fit a vectorizer on empty documents"));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for d in docs {
        let mut grams = ngrams(d, config.ngram_max);
        grams.sort_unstable();
        grams.dedup();
        for g in grams {
            *df.entry(g).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= config.min_df.max(1)).collect();
    if let Some(cap) = config.max_features {
        if kept.len() > cap {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(cap);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }
    if kept.is_empty() {
        return Err(Error::invalid("no term reaches min_df"));
    }
    let n = docs.len() as f64;
    let idf = (config.mode == VectorizerMode::Tfidf)
        .then(|| kept.iter().map(|(_, c)| ((1.0 + n) / (1.0 + *c as f64)).ln() + 1.0).collect());
    Ok(VectorizerModel {
        mode: config.mode,
        ngram_max: config.ngram_max,
        min_df: config.min_df,
        terms: kept.into_iter().map(|(t, _)| t).collect(),
        idf,
    })
}

impl VectorizerModel {
    pub fn n_features(&self) -> usize {
        self.terms.len()
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect()
    }

    /// Count, binary, or L2-normalized tf-idf rows; unseen terms are ignored.
    pub fn transform(&self, docs: &[Vec<String>]) -> SparseMatrix {
        let index = self.index();
        let mut out = SparseMatrix::new(self.terms.len());
        for d in docs {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for g in ngrams(d, self.ngram_max) {
                if let Some(&j) = index.get(g.as_str()) {
                    *counts.entry(j).or_default() += 1.0;
                }
            }
            let mut row: Vec<(usize, f64)> = counts.into_iter().collect();
            match self.mode {
                VectorizerMode::Count => {}
                VectorizerMode::Binary => row.iter_mut().for_each(|e| e.1 = 1.0),
                VectorizerMode::Tfidf => {
                    let idf = self.idf.as_ref().expect("tfidf model carries idf");
                    row.iter_mut().for_each(|e| e.1 *= idf[e.0]);
                    let norm = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        row.iter_mut().for_each(|e| e.1 /= norm);
                    }
                }
            }
            out.push_row(&row).expect("columns sorted and in range");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn cfg(mode: VectorizerMode, ngram_max: usize) -> VectorizerConfig {
        VectorizerConfig { mode, ngram_max, min_df: 1, max_features: None }
    }

    #[test]
    fn tfidf_idf_values() {
        let d = docs(&[&["a", "b"], &["a", "c"]]);
        let m = fit_vectorizer(&d, &cfg(VectorizerMode::Tfidf, 1)).unwrap();
        assert_eq!(m.terms, vec!["a", "b", "c"]);
        let idf = m.idf.as_ref().unwrap();
        assert!((idf[0] - 1.0).abs() < 1e-12);
        let want = (3.0f64 / 2.0).ln() + 1.0;
        assert!((idf[1] - want).abs() < 1e-12 && (idf[2] - want).abs() < 1e-12);
        assert!((want - 1.4055).abs() < 1e-4);

        let x = m.transform(&d[..1]).to_dense();
        // pre-norm [1.0, 1.4055, 0] -> norm sqrt(1 + 1.4055^2)
        let norm = (1.0 + want * want).sqrt();
        assert!((x.data[0] - 1.0 / norm).abs() < 1e-12);
        assert!((x.data[1] - want / norm).abs() < 1e-12);
        assert!((x.data[0] - 0.5797).abs() < 1e-4 && (x.data[1] - 0.8148).abs() < 1e-4);
        assert_eq!(x.data[2], 0.0);
    }

    #[test]
    fn count_single_doc() {
        let d = docs(&[&["a"]]);
        let m = fit_vectorizer(&d, &cfg(VectorizerMode::Count, 1)).unwrap();
        assert_eq!(m.terms, vec!["a"]);
        assert!(m.idf.is_none());
        assert_eq!(m.transform(&d).to_dense().data, vec![1.0]);
    }

    #[test]
    fn bigram_vocabulary() {
        let m = fit_vectorizer(&docs(&[&["a", "b"]]), &cfg(VectorizerMode::Count, 2)).unwrap();
        assert_eq!(m.terms, vec!["a", "a_b", "b"]);
    }

    #[test]
    fn empty_and_unseen_rows_are_zero() {
        let m = fit_vectorizer(&docs(&[&["a", "b"], &["a", "c"]]), &cfg(VectorizerMode::Tfidf, 1)).unwrap();
        let x = m.transform(&docs(&[&[], &["zzz", "yyy"]]));
        assert_eq!(x.nnz(), 0);
        assert_eq!(x.n_rows, 2);
    }

    #[test]
    fn binary_mode_and_min_df() {
        let d = docs(&[&["a", "a", "b"], &["a"]]);
        let m = fit_vectorizer(&d, &VectorizerConfig { mode: VectorizerMode::Binary, ngram_max: 1, min_df: 2, max_features: None }).unwrap();
        assert_eq!(m.terms, vec!["a"]);
        assert_eq!(m.transform(&d).to_dense().data, vec![1.0, 1.0]);
    }

    #[test]
    fn max_features_keeps_most_frequent() {
        let d = docs(&[&["a", "b", "c"], &["b", "c"], &["c"]]);
        let m = fit_vectorizer(&d, &VectorizerConfig { max_features: Some(2), ..cfg(VectorizerMode::Count, 1) }).unwrap();
        assert_eq!(m.terms, vec!["b", "c"]);
    }

    #[test]
    fn rejects_empty_input() {
        assert!(fit_vectorizer(&[], &VectorizerConfig::default()).is_err());
        assert!(fit_vectorizer(&docs(&[&[], &[]]), &VectorizerConfig::default()).is_err());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        let tok = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]).prop_map(String::from);
        prop::collection::vec(prop::collection::vec(tok, 0..8), 1..12)
            .prop_filter("some token", |d| d.iter().any(|x| !x.is_empty()))
    }

    proptest! {
        #[test]
        fn tfidf_rows_are_unit_or_zero(d in corpus(), bigrams in proptest::bool::ANY) {
            let m = fit_vectorizer(&d, &cfg(VectorizerMode::Tfidf, if bigrams { 2 } else { 1 })).unwrap();
            let x = m.transform(&d);
            for i in 0..x.n_rows {
                let (_, v) = x.row(i);
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                prop_assert!(v.is_empty() || (n - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn count_column_sums_equal_term_frequencies(d in corpus()) {
            let m = fit_vectorizer(&d, &cfg(VectorizerMode::Count, 2)).unwrap();
            let totals = m.transform(&d).column_totals();
            let mut tf: BTreeMap<String, f64> = BTreeMap::new();
            for doc in &d {
                for g in ngrams(doc, 2) {
                    *tf.entry(g).or_default() += 1.0;
                }
            }
            for (j, t) in m.terms.iter().enumerate() {
                prop_assert_eq!(totals[j], tf[t]);
            }
        }

        #[test]
        fn fit_transform_is_deterministic(d in corpus()) {
            let c = cfg(VectorizerMode::Tfidf, 2);
            let a = fit_vectorizer(&d, &c).unwrap().transform(&d);
            let b = fit_vectorizer(&d, &c).unwrap().transform(&d);
            prop_assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        }
    }
}

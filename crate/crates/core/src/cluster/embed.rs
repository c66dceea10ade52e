use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{fit_vectorizer, VectorizerConfig, VectorizerMode, VectorizerModel, Vocabulary};
use crate::linalg::{dot, norm2, Matrix};
use crate::reduce::{densify, fit_pca, PcaModel, DEFAULT_DENSIFY_CAP};
use crate::scalar::Real;
use crate::summarizer::Seq2SeqModel;

/// Component cap for the LSA backend.
pub const LSA_DIMS: usize = 100;

/// `1 − cos(a, b)`, with similarity 0 whenever either vector is zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0)
}

fn words(intent: &str) -> Vec<String> {
    intent.split_whitespace().map(str::to_string).collect()
}

/// Maps intents to fixed-width vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingBackend {
    /// Unigram TF-IDF projected by PCA.
    Lsa { vectorizer: VectorizerModel, pca: PcaModel<f64> },
    /// Mean of the summarizer's source-embedding rows.
    EncoderMean { vocab: Vocabulary, table: Matrix<f64> },
}

impl EmbeddingBackend {
    /// Fits the LSA backend on (normalized) intents; the PCA keeps at most
    /// `dims` components, fewer when the data has fewer rows or terms.
    pub fn fit_lsa(intents: &[String], dims: usize) -> Result<Self> {
        let docs: Vec<Vec<String>> = intents.iter().map(|s| words(s)).collect();
        let config = VectorizerConfig { mode: VectorizerMode::Tfidf, ngram_max: 1, ..VectorizerConfig::default() };
        let vectorizer = fit_vectorizer(&docs, &config)?;
        let x: Matrix<f64> = densify(&vectorizer.transform(&docs), DEFAULT_DENSIFY_CAP)?;
        let k = dims.min(x.rows).min(x.cols);
        if k == 0 {
            return Err(Error::invalid("LSA needs at least one intent with a token"));
        }
        let pca = fit_pca(&x, k)?;
        Ok(Self::Lsa { vectorizer, pca })
    }

    pub fn encoder_mean<T: Real>(model: &Seq2SeqModel<T>, vocab: &Vocabulary) -> Result<Self> {
        if vocab.len() != model.v_src {
            return Err(Error::DimensionMismatch { expected: model.v_src, got: vocab.len() });
        }
        let table = model.tensor("src_embedding").expect("source embedding tensor");
        let data = table.iter().map(|v| v.as_f64()).collect();
        Ok(Self::EncoderMean { vocab: vocab.clone(), table: Matrix::from_vec(model.v_src, model.dims.embed, data)? })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lsa { pca, .. } => pca.n_components(),
            Self::EncoderMean { table, .. } => table.cols,
        }
    }

    /// One row per intent; intents without tokens map to the zero row.
    pub fn embed_intents(&self, intents: &[String]) -> Result<Matrix<f64>> {
        let docs: Vec<Vec<String>> = intents.iter().map(|s| words(s)).collect();
        let mut out = Matrix::zeros(docs.len(), self.dim());
        match self {
            Self::Lsa { vectorizer, pca } => {
                let projected = pca.transform_sparse(&vectorizer.transform(&docs))?;
                for (i, d) in docs.iter().enumerate() {
                    if !d.is_empty() {
                        out.row_mut(i).copy_from_slice(projected.row(i));
                    }
                }
            }
            Self::EncoderMean { vocab, table } => {
                for (i, d) in docs.iter().enumerate() {
                    if d.is_empty() {
                        continue;
                    }
                    let row = out.row_mut(i);
                    for w in d {
                        row.iter_mut().zip(table.row(vocab.id(w))).for_each(|(a, &b)| *a += b);
                    }
                    let inv = 1.0 / d.len() as f64;
                    row.iter_mut().for_each(|v| *v *= inv);
                }
            }
        }
        Ok(out)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseMatrix;
use crate::linalg::Matrix;
use crate::rng::SplitMix64;

/// Stream id mixed into the model seed for fold-in inference.
const INFER_STREAM: u64 = 0x1f01d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Defaults to `50 / K` when unset.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub infer_iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            n_topics: 100,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            infer_iterations: 50,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub n_topics: usize,
    pub vocab_size: usize,
    /// `K × V`, each row a distribution over words.
    pub topic_word: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub infer_iterations: usize,
}

fn tokens_of(idx: &[usize], val: &[f64]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (&w, &c) in idx.iter().zip(val) {
        if !(c >= 0.0 && c.fract() == 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("LDA counts must be non-negative integers, got {c}")));
        }
        out.extend(std::iter::repeat_n(w, c as usize));
    }
    Ok(out)
}

fn sample(rng: &mut SplitMix64, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.next_f64() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Collapsed Gibbs sampling over a document-term count matrix.
pub fn fit_lda(counts: &SparseMatrix, config: &LdaConfig) -> Result<LdaModel> {
    let k = config.n_topics;
    if k < 1 {
        return Err(Error::invalid("LDA needs at least one topic"));
    }
    if !(config.beta > 0.0) {
        return Err(Error::invalid("LDA beta must be positive"));
    }
    let alpha = config.alpha.unwrap_or(50.0 / k as f64);
    if !(alpha > 0.0) {
        return Err(Error::invalid("LDA alpha must be positive"));
    }
    let v = counts.n_cols;
    let beta = config.beta;
    let vbeta = v as f64 * beta;
    let docs: Vec<Vec<usize>> = (0..counts.n_rows)
        .map(|i| {
            let (idx, val) = counts.row(i);
            tokens_of(idx, val)
        })
        .collect::<Result<_>>()?;

    let mut rng = SplitMix64::new(config.seed);
    let mut n_dk = vec![vec![0u32; k]; docs.len()];
    let mut n_kw = vec![vec![0u32; v]; k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let zd: Vec<usize> = doc.iter().map(|_| rng.index(k)).collect();
        for (&w, &t) in doc.iter().zip(&zd) {
            n_dk[d][t] += 1;
            n_kw[t][w] += 1;
            n_k[t] += 1;
        }
        z.push(zd);
    }
    let mut p = vec![0.0; k];
    for _ in 0..config.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                for t in 0..k {
                    p[t] = (n_dk[d][t] as f64 + alpha) * (n_kw[t][w] as f64 + beta) / (n_k[t] as f64 + vbeta);
                }
                let new = sample(&mut rng, &p);
                z[d][i] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }
    let topic_word = (0..k)
        .map(|t| {
            let denom = n_k[t] as f64 + vbeta;
            n_kw[t].iter().map(|&c| (c as f64 + beta) / denom).collect()
        })
        .collect();
    Ok(LdaModel {
        n_topics: k,
        vocab_size: v,
        topic_word,
        alpha,
        beta,
        seed: config.seed,
        iterations: config.iterations,
        infer_iterations: config.infer_iterations,
    })
}

/// Topic proportions of one document by fold-in Gibbs sampling with the
/// topic-word rows frozen. Deterministic for a given model and document.
pub fn lda_infer(model: &LdaModel, idx: &[usize], counts: &[f64]) -> Result<Vec<f64>> {
    let k = model.n_topics;
    if let Some(&w) = idx.iter().find(|&&w| w >= model.vocab_size) {
        return Err(Error::DimensionMismatch { expected: model.vocab_size, got: w + 1 });
    }
    let doc = tokens_of(idx, counts)?;
    let mut rng = SplitMix64::new(SplitMix64::derive(model.seed, INFER_STREAM));
    let mut n_dk = vec![0u32; k];
    let mut z: Vec<usize> = doc
        .iter()
        .map(|_| {
            let t = rng.index(k);
            n_dk[t] += 1;
            t
        })
        .collect();
    let mut p = vec![0.0; k];
    for _ in 0..model.infer_iterations {
        for (i, &w) in doc.iter().enumerate() {
            n_dk[z[i]] -= 1;
            for t in 0..k {
                p[t] = (n_dk[t] as f64 + model.alpha) * model.topic_word[t][w];
            }
            z[i] = sample(&mut rng, &p);
            n_dk[z[i]] += 1;
        }
    }
    let denom = doc.len() as f64 + k as f64 * model.alpha;
    Ok(n_dk.iter().map(|&c| (c as f64 + model.alpha) / denom).collect())
}

/// Topic proportions for every row of `counts` (`n × K`).
pub fn lda_transform(model: &LdaModel, counts: &SparseMatrix) -> Result<Matrix<f64>> {
    let mut out = Matrix::zeros(counts.n_rows, model.n_topics);
    for i in 0..counts.n_rows {
        let (idx, val) = counts.row(i);
        let theta = lda_infer(model, idx, val)?;
        out.row_mut(i).copy_from_slice(&theta);
    }
    Ok(out)
}

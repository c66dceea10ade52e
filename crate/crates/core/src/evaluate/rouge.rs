use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub rouge1_p: f64,
    pub rouge1_r: f64,
    #[serde(rename = "rougeL_p")]
    pub rouge_l_p: f64,
    #[serde(rename = "rougeL_r")]
    pub rouge_l_r: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn clipped_overlap<S: AsRef<str>>(cand: &[S], reference: &[S]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in cand {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

/// Clipped unigram overlap as (precision, recall). An empty side scores 0.
pub fn rouge1<S: AsRef<str>>(cand: &[S], reference: &[S]) -> (f64, f64) {
    let o = clipped_overlap(cand, reference);
    (ratio(o, cand.len()), ratio(o, reference.len()))
}

/// Longest common subsequence length (two-row DP).
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based (precision, recall) over the whole token sequence.
pub fn rouge_l<S: AsRef<str>>(cand: &[S], reference: &[S]) -> (f64, f64) {
    let l = lcs_len(cand, reference);
    (ratio(l, cand.len()), ratio(l, reference.len()))
}

pub fn rouge<S: AsRef<str>>(cand: &[S], reference: &[S]) -> RougeScore {
    let (rouge1_p, rouge1_r) = rouge1(cand, reference);
    let (rouge_l_p, rouge_l_r) = rouge_l(cand, reference);
    RougeScore { rouge1_p, rouge1_r, rouge_l_p, rouge_l_r }
}

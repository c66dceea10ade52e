use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{check_training_data, class_weights, sigmoid};

/// Regression tree node. Leaves have `feature == None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match n.feature {
                None => return n.value,
                Some(f) => i = if row[f] <= n.threshold { n.left } else { n.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].feature {
                None => 0,
                Some(_) => 1 + go(t, t.nodes[i].left).max(go(t, t.nodes[i].right)),
            }
        }
        go(self, 0)
    }
}

/// Decision stump voting ±1: `+1` iff `(x[feature] > threshold) == positive_above`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub positive_above: bool,
    pub alpha: f64,
}

impl Stump {
    pub fn vote(&self, row: &[f64]) -> f64 {
        if (row[self.feature] > self.threshold) == self.positive_above {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TreeEnsembleModel {
    /// `p = σ(bias + lr · Σ tree(x))`.
    Gbm { bias: f64, learning_rate: f64, trees: Vec<Tree> },
    /// `p = σ(2 Σ α·vote(x))`.
    AdaBoost { stumps: Vec<Stump> },
}

impl TreeEnsembleModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        match self {
            TreeEnsembleModel::Gbm { bias, learning_rate, trees } => {
                bias + learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>()
            }
            TreeEnsembleModel::AdaBoost { stumps } => 2.0 * stumps.iter().map(|s| s.alpha * s.vote(row)).sum::<f64>(),
        }
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Vec<f64> {
        (0..x.rows).map(|i| sigmoid(self.raw_score(x.row(i)))).collect()
    }

    pub fn n_members(&self) -> usize {
        match self {
            TreeEnsembleModel::Gbm { trees, .. } => trees.len(),
            TreeEnsembleModel::AdaBoost { stumps } => stumps.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values (added to the hessian sum).
    pub l2: f64,
    pub min_child_weight: f64,
    pub balanced: bool,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self { rounds: 100, depth: 3, learning_rate: 0.1, l2: 1.0, min_child_weight: 1e-3, balanced: true }
    }
}

/// Row indices sorted by each feature, computed once per fit.
fn presort(x: &Matrix<f64>) -> Vec<Vec<u32>> {
    (0..x.cols)
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.rows as u32).collect();
            idx.sort_by(|&a, &b| x[(a as usize, f)].total_cmp(&x[(b as usize, f)]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Split point between two adjacent distinct sorted values.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one tree level by level with exact greedy splits.
fn grow_tree(x: &Matrix<f64>, sorted: &[Vec<u32>], g: &[f64], h: &[f64], cfg: &GbmConfig) -> Tree {
    let n = x.rows;
    let score = |gs: f64, hs: f64| gs * gs / (hs + cfg.l2);
    let mut nodes = vec![Node { feature: None, threshold: 0.0, left: 0, right: 0, value: 0.0 }];
    let mut node_of = vec![0usize; n];
    let mut open = vec![0usize];
    for _level in 0..cfg.depth {
        if open.is_empty() {
            break;
        }
        let mut slot = vec![usize::MAX; nodes.len()];
        for (k, &id) in open.iter().enumerate() {
            slot[id] = k;
        }
        let m = open.len();
        let mut tot_g = vec![0.0; m];
        let mut tot_h = vec![0.0; m];
        for i in 0..n {
            let s = slot[node_of[i]];
            if s != usize::MAX {
                tot_g[s] += g[i];
                tot_h[s] += h[i];
            }
        }
        let mut best: Vec<Option<Split>> = vec![None; m];
        for (f, order) in sorted.iter().enumerate() {
            let mut gl = vec![0.0; m];
            let mut hl = vec![0.0; m];
            let mut last: Vec<Option<f64>> = vec![None; m];
            for &r in order {
                let r = r as usize;
                let s = slot[node_of[r]];
                if s == usize::MAX {
                    continue;
                }
                let v = x[(r, f)];
                if let Some(prev) = last[s] {
                    if v != prev && hl[s] >= cfg.min_child_weight && tot_h[s] - hl[s] >= cfg.min_child_weight {
                        let gain = score(gl[s], hl[s]) + score(tot_g[s] - gl[s], tot_h[s] - hl[s]) - score(tot_g[s], tot_h[s]);
                        if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Split { gain, feature: f, threshold: midpoint(prev, v) });
                        }
                    }
                }
                gl[s] += g[r];
                hl[s] += h[r];
                last[s] = Some(v);
            }
        }
        let mut next = Vec::new();
        for (k, &id) in open.iter().enumerate() {
            if let Some(sp) = best[k] {
                let l = nodes.len();
                nodes.push(Node { feature: None, threshold: 0.0, left: 0, right: 0, value: 0.0 });
                nodes.push(Node { feature: None, threshold: 0.0, left: 0, right: 0, value: 0.0 });
                nodes[id] = Node { feature: Some(sp.feature), threshold: sp.threshold, left: l, right: l + 1, value: 0.0 };
                next.push(l);
                next.push(l + 1);
            }
        }
        for i in 0..n {
            let nd = &nodes[node_of[i]];
            if let Some(f) = nd.feature {
                if slot[node_of[i]] != usize::MAX {
                    node_of[i] = if x[(i, f)] <= nd.threshold { nd.left } else { nd.right };
                }
            }
        }
        open = next;
    }
    let mut gs = vec![0.0; nodes.len()];
    let mut hs = vec![0.0; nodes.len()];
    for i in 0..n {
        gs[node_of[i]] += g[i];
        hs[node_of[i]] += h[i];
    }
    for (k, nd) in nodes.iter_mut().enumerate() {
        if nd.feature.is_none() {
            nd.value = -gs[k] / (hs[k] + cfg.l2);
        }
    }
    Tree { nodes }
}

/// Gradient boosting on the logistic loss. Each round fits a depth-limited
/// tree to the weighted gradients and sets leaves by one Newton step.
pub fn train_gbm(x: &Matrix<f64>, y: &[bool], cfg: &GbmConfig) -> Result<TreeEnsembleModel> {
    check_training_data(x, y)?;
    if cfg.rounds == 0 || cfg.depth == 0 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) {
        return Err(Error::invalid("GBM needs rounds >= 1, depth >= 1, learning_rate > 0 and l2 >= 0"));
    }
    let c = class_weights(y, cfg.balanced);
    let c_sum: f64 = c.iter().sum();
    let pos: f64 = c.iter().zip(y).filter(|(_, &t)| t).map(|(w, _)| w).sum();
    let rate = pos / c_sum;
    let bias = (rate / (1.0 - rate)).ln();
    let sorted = presort(x);
    let n = x.rows;
    let mut f = vec![bias; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        for i in 0..n {
            let p = sigmoid(f[i]);
            g[i] = c[i] * (p - if y[i] { 1.0 } else { 0.0 });
            h[i] = c[i] * (p * (1.0 - p)).max(1e-16);
        }
        let tree = grow_tree(x, &sorted, &g, &h, cfg);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += cfg.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok(TreeEnsembleModel::Gbm { bias, learning_rate: cfg.learning_rate, trees })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostConfig {
    pub rounds: usize,
    pub balanced: bool,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self { rounds: 50, balanced: true }
    }
}

/// Lowest weighted-error stump. Candidates: every cut between distinct
/// sorted values plus the all-one-side cut, both polarities.
fn best_stump(x: &Matrix<f64>, sorted: &[Vec<u32>], y: &[bool], w: &[f64]) -> (Stump, f64) {
    let total: f64 = w.iter().sum();
    let pos_total: f64 = w.iter().zip(y).filter(|(_, &t)| t).map(|(v, _)| v).sum();
    let mut best = (Stump { feature: 0, threshold: f64::NEG_INFINITY, positive_above: true, alpha: 0.0 }, f64::INFINITY);
    for (f, order) in sorted.iter().enumerate() {
        // weight of positives / negatives at or below the cut
        let (mut pos_le, mut neg_le) = (0.0, 0.0);
        let consider = |thr: f64, pos_le: f64, neg_le: f64, best: &mut (Stump, f64)| {
            // positive_above: errors are positives below + negatives above
            let e_above = (pos_le + (total - pos_total - neg_le)) / total;
            let e_below = 1.0 - e_above;
            for (err, pa) in [(e_above, true), (e_below, false)] {
                if err < best.1 - 1e-15 {
                    *best = (Stump { feature: f, threshold: thr, positive_above: pa, alpha: 0.0 }, err);
                }
            }
        };
        let first = x[(order[0] as usize, f)];
        consider(first - 1.0, 0.0, 0.0, &mut best);
        for k in 0..order.len() {
            let r = order[k] as usize;
            if y[r] {
                pos_le += w[r];
            } else {
                neg_le += w[r];
            }
            let v = x[(r, f)];
            if let Some(&nx) = order.get(k + 1) {
                let nv = x[(nx as usize, f)];
                if nv != v {
                    consider(midpoint(v, nv), pos_le, neg_le, &mut best);
                }
            }
        }
    }
    best
}

/// Discrete AdaBoost with decision stumps. Stops early when a stump is
/// perfect (α capped at ln(1e6)/2) or no better than chance.
pub fn train_adaboost(x: &Matrix<f64>, y: &[bool], cfg: &AdaBoostConfig) -> Result<TreeEnsembleModel> {
    check_training_data(x, y)?;
    if cfg.rounds == 0 {
        return Err(Error::invalid("AdaBoost needs rounds >= 1"));
    }
    let sorted = presort(x);
    let mut w = class_weights(y, cfg.balanced);
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let mut stumps = Vec::new();
    for _ in 0..cfg.rounds {
        let (mut stump, err) = best_stump(x, &sorted, y, &w);
        if err >= 0.5 - 1e-12 {
            break;
        }
        let perfect = err <= 0.0;
        stump.alpha = if perfect { 1e6f64.ln() / 2.0 } else { 0.5 * ((1.0 - err) / err).ln() };
        stumps.push(stump);
        if perfect {
            break;
        }
        for (i, wi) in w.iter_mut().enumerate() {
            let yt = if y[i] { 1.0 } else { -1.0 };
            *wi *= (-stump.alpha * yt * stump.vote(x.row(i))).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
    }
    Ok(TreeEnsembleModel::AdaBoost { stumps })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::SplitMix64;
use crate::scalar::CompensatedSum;

use super::{check_training_data, class_weights, sigmoid, softplus};

/// Platt scaling `p = 1 / (1 + exp(a·s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, score: f64) -> f64 {
        sigmoid(-(self.a * score + self.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Present for SVMs, whose raw scores are margins.
    pub calibration: Option<Platt>,
}

impl LinearModel {
    pub fn scores(&self, x: &Matrix<f64>) -> Vec<f64> {
        (0..x.rows).map(|i| dot(x.row(i), &self.weights) + self.bias).collect()
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Vec<f64> {
        self.scores(x)
            .into_iter()
            .map(|s| match &self.calibration {
                Some(p) => p.apply(s),
                None => sigmoid(s),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregConfig {
    pub lambda: f64,
    pub balanced: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogregConfig {
    fn default() -> Self {
        Self { lambda: 1e-2, balanced: true, max_iter: 500, tol: 1e-6 }
    }
}

/// Objective value after each accepted step (index 0 is the start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregTrace {
    pub objective: Vec<f64>,
    pub converged: bool,
}

struct Objective<'a> {
    x: &'a Matrix<f64>,
    y: &'a [bool],
    c: Vec<f64>,
    c_sum: f64,
    lambda: f64,
}

impl Objective<'_> {
    fn value(&self, w: &[f64], b: f64) -> f64 {
        let mut s = CompensatedSum::default();
        for i in 0..self.x.rows {
            let z = dot(self.x.row(i), w) + b;
            let l = softplus(z) - if self.y[i] { z } else { 0.0 };
            s.add(self.c[i] * l);
        }
        s.value() / self.c_sum + 0.5 * self.lambda * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let d = w.len();
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for i in 0..self.x.rows {
            let row = self.x.row(i);
            let r = self.c[i] * (sigmoid(dot(row, w) + b) - if self.y[i] { 1.0 } else { 0.0 }) / self.c_sum;
            gb += r;
            gw.iter_mut().zip(row).for_each(|(g, &v)| *g += r * v);
        }
        gw.iter_mut().zip(w).for_each(|(g, &wv)| *g += self.lambda * wv);
        (gw, gb)
    }
}

/// L2-regularized logistic regression by gradient descent with Armijo
/// backtracking. The bias is not penalized.
pub fn train_logreg(x: &Matrix<f64>, y: &[bool], config: &LogregConfig) -> Result<(LinearModel, LogregTrace)> {
    check_training_data(x, y)?;
    if !(config.lambda >= 0.0) {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    let c = class_weights(y, config.balanced);
    let obj = Objective { x, y, c_sum: c.iter().sum(), c, lambda: config.lambda };
    let mut w = vec![0.0; x.cols];
    // start from the optimum over the bias alone
    let rate = obj.c.iter().zip(y).filter(|(_, &t)| t).map(|(c, _)| c).sum::<f64>() / obj.c_sum;
    let mut b = (rate / (1.0 - rate)).ln();
    let mut f = obj.value(&w, b);
    let mut trace = LogregTrace { objective: vec![f], converged: false };
    let mut step: f64 = 1.0;
    for _ in 0..config.max_iter {
        let (gw, gb) = obj.gradient(&w, b);
        let inf = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if inf < config.tol {
            trace.converged = true;
            break;
        }
        let g2 = dot(&gw, &gw) + gb * gb;
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-20 {
            let wn: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let bn = b - step * gb;
            let fn_ = obj.value(&wn, bn);
            if fn_ <= f - 0.5 * step * g2 {
                w = wn;
                b = bn;
                f = fn_;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.objective.push(f);
    }
    Ok((LinearModel { weights: w, bias: b, calibration: None }, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub balanced: bool,
    /// Fraction of the training rows held out for Platt calibration.
    pub calibration_fraction: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, epochs: 50, balanced: true, calibration_fraction: 0.2, seed: 42 }
    }
}

/// Linear SVM by Pegasos SGD on `λ/2‖w‖² + mean weighted hinge`, then Platt
/// calibration on a seeded holdout. The bias is updated as the weight of a
/// constant unit feature, so it shrinks with `w`; an unshrunk bias takes
/// steps of size `1/(λt)` early on and drifts far off.
pub fn train_linear_svm(x: &Matrix<f64>, y: &[bool], config: &SvmConfig) -> Result<LinearModel> {
    check_training_data(x, y)?;
    if !(config.lambda > 0.0) || config.epochs == 0 || !(0.0..1.0).contains(&config.calibration_fraction) {
        return Err(Error::invalid("SVM needs lambda > 0, epochs >= 1 and a calibration fraction in [0, 1)"));
    }
    let n = x.rows;
    let mut rng = SplitMix64::new(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_cal = ((n as f64) * config.calibration_fraction).round() as usize;
    let (cal, fit) = order.split_at(n_cal.min(n.saturating_sub(2)));
    let (cal, mut fit) = (cal.to_vec(), fit.to_vec());
    // the fitting part must still contain both classes
    if fit.iter().all(|&i| y[i]) || fit.iter().all(|&i| !y[i]) {
        fit = (0..n).collect();
    }
    let fit_y: Vec<bool> = fit.iter().map(|&i| y[i]).collect();
    let c = class_weights(&fit_y, config.balanced);
    let mut w = vec![0.0; x.cols];
    let mut b = 0.0;
    let mut t = 0usize;
    let mut pos: Vec<usize> = (0..fit.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut pos);
        for &p in &pos {
            t += 1;
            let eta = 1.0 / (config.lambda * t as f64);
            let row = x.row(fit[p]);
            let yt = if fit_y[p] { 1.0 } else { -1.0 };
            let margin = yt * (dot(row, &w) + b);
            let shrink = 1.0 - eta * config.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                let step = eta * yt * c[p];
                w.iter_mut().zip(row).for_each(|(v, &xv)| *v += step * xv);
                b += step;
            }
        }
    }
    let mut model = LinearModel { weights: w, bias: b, calibration: None };
    let cal_rows = if cal.is_empty() { fit.clone() } else { cal };
    let scores: Vec<f64> = cal_rows.iter().map(|&i| dot(x.row(i), &model.weights) + model.bias).collect();
    let labels: Vec<bool> = cal_rows.iter().map(|&i| y[i]).collect();
    model.calibration = Some(fit_platt(&scores, &labels));
    Ok(model)
}

/// Platt's sigmoid fit by the Newton method with backtracking of Lin, Lin
/// and Weng, using the smoothed targets `(N₊+1)/(N₊+2)` and `1/(N₋+2)`.
pub fn fit_platt(scores: &[f64], labels: &[bool]) -> Platt {
    let prior1 = labels.iter().filter(|v| **v).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&v| if v { hi } else { lo }).collect();
    let (min_step, sigma, eps) = (1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let fval = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&s, &ti)| {
                let f = s * a + b;
                if f >= 0.0 {
                    ti * f + (-f).exp().ln_1p()
                } else {
                    (ti - 1.0) * f + f.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut f = fval(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let fapb = s * a + b;
            let (p, q) = if fapb >= 0.0 {
                let e = (-fapb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fapb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval(na, nb);
            if nf < f + 1e-4 * step * gd {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    Platt { a, b }
}

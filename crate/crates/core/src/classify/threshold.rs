use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating point picked by [`choose_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
}

/// Precision and recall of `pred` against `labels`, with 0/0 read as 0.
pub fn precision_recall(pred: &[bool], labels: &[bool]) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, tp + fp), ratio(tp, tp + fneg))
}

/// Picks the threshold (an observed score; positive means `score >= t`)
/// with the highest precision among those with recall `>= r_min`. Ties go
/// to the higher threshold. Precisions are compared as exact fractions.
pub fn choose_threshold(scores: &[f64], labels: &[bool], r_min: f64) -> Result<ThresholdChoice> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if !(0.0..=1.0).contains(&r_min) {
        return Err(Error::invalid("r_min must lie in [0, 1]"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = labels.iter().filter(|v| **v).count();
    if n_pos == 0 {
        return Err(Error::invalid("no positive labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut best: Option<ThresholdChoice> = None;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    // descending sweep: the first candidate kept on a tie is the higher threshold
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        if recall < r_min {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => (tp * (b.tp + b.fp)) > (b.tp * (tp + fp)),
        };
        if better {
            best = Some(ThresholdChoice { threshold: t, precision: tp as f64 / (tp + fp) as f64, recall, tp, fp });
        }
    }
    best.ok_or_else(|| Error::invalid("no threshold reaches the recall floor"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    /// Exhaustive oracle: every observed score, P/R as exact fractions.
    fn oracle(scores: &[f64], labels: &[bool], r_min: f64) -> (f64, usize, usize) {
        let n_pos = labels.iter().filter(|v| **v).count();
        let mut best: Option<(f64, usize, usize)> = None;
        for &t in scores {
            let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l).count();
            let pp = scores.iter().filter(|s| **s >= t).count();
            if (tp as f64) / (n_pos as f64) < r_min {
                continue;
            }
            best = match best {
                None => Some((t, tp, pp)),
                Some((bt, btp, bpp)) => {
                    let lhs = tp * bpp;
                    let rhs = btp * pp;
                    if lhs > rhs || (lhs == rhs && t > bt) {
                        Some((t, tp, pp))
                    } else {
                        Some((bt, btp, bpp))
                    }
                }
            };
        }
        best.unwrap()
    }

    #[test]
    fn worked_example() {
        let c = choose_threshold(&[0.9, 0.8, 0.1], &[true, false, true], 0.5).unwrap();
        assert_eq!(c.threshold, 0.9);
        assert_eq!((c.precision, c.recall), (1.0, 0.5));
    }

    #[test]
    fn r_min_zero_takes_max_precision() {
        let c = choose_threshold(&[0.2, 0.4, 0.6, 0.8], &[true, false, true, false], 0.0).unwrap();
        assert_eq!(c.threshold, 0.6);
        assert_eq!(c.precision, 0.5);
        let c = choose_threshold(&[0.2, 0.4, 0.6, 0.8], &[false, false, true, false], 0.0).unwrap();
        assert_eq!(c.threshold, 0.6);
    }

    #[test]
    fn all_positive_takes_highest_feasible_threshold() {
        let c = choose_threshold(&[0.1, 0.5, 0.7, 0.9], &[true; 4], 0.5).unwrap();
        assert_eq!(c.threshold, 0.7);
        assert_eq!(c.precision, 1.0);
    }

    #[test]
    fn rejects_no_positives_and_mismatch() {
        assert!(choose_threshold(&[0.1, 0.2], &[false, false], 0.1).is_err());
        assert!(choose_threshold(&[0.1], &[false, true], 0.1).is_err());
    }

    #[test]
    fn agrees_with_exhaustive_enumeration() {
        for seed in 0..300u64 {
            let mut rng = SplitMix64::new(seed);
            let n = 1 + rng.index(100);
            // coarse grid so ties are common
            let scores: Vec<f64> = (0..n).map(|_| rng.index(12) as f64 / 11.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
            labels[rng.index(n)] = true;
            let r_min = rng.index(11) as f64 / 10.0;
            let c = choose_threshold(&scores, &labels, r_min).unwrap();
            let (t, tp, pp) = oracle(&scores, &labels, r_min);
            assert_eq!(c.threshold, t, "seed {seed}");
            assert_eq!((c.tp, c.tp + c.fp), (tp, pp));
        }
    }

    #[test]
    fn precision_recall_zero_conventions() {
        assert_eq!(precision_recall(&[false, false], &[true, false]), (0.0, 0.0));
        assert_eq!(precision_recall(&[true, true, false], &[true, false, true]), (0.5, 0.5));
    }

    proptest! {
        #[test]
        fn choice_meets_recall_floor(
            pairs in proptest::collection::vec((0u8..20, any::<bool>()), 1..60),
            r in 0u8..=10,
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let mut labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            labels[0] = true;
            let r_min = r as f64 / 10.0;
            let c = choose_threshold(&scores, &labels, r_min).unwrap();
            let pred: Vec<bool> = scores.iter().map(|s| *s >= c.threshold).collect();
            let (p, rec) = precision_recall(&pred, &labels);
            prop_assert!(rec >= r_min);
            prop_assert_eq!(p, c.precision);
            prop_assert_eq!(rec, c.recall);
        }
    }
}

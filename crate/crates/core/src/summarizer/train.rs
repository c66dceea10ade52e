use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::{CompensatedSum, Real};

use super::model::Seq2SeqModel;
use super::network::SeqPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Stop once the epoch's training loss falls below this value.
    pub stop_at_train_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-7,
            clip_norm: 5.0,
            batch_size: 32,
            max_epochs: 50,
            patience: 3,
            seed: 42,
            stop_at_train_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.rho, self.epsilon, self.clip_norm];
        if positive.iter().any(|v| !(*v > 0.0)) || self.rho >= 1.0 {
            return Err(Error::invalid("learning rate, epsilon and clip norm must be positive; rho in (0, 1)"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("batch size, max epochs and patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Largest pre-clipping gradient norm seen in the epoch.
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Validation-loss early stopping: stop after `patience` consecutive epochs
/// without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, bad_epochs: 0 }
    }

    /// Records a loss; returns `(improved, should_stop)`.
    pub fn observe(&mut self, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs >= self.patience)
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Scales `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients<T: Real>(grad: &mut [T], max_norm: f64) -> f64 {
    let sq: CompensatedSum = grad.iter().map(|g| {
        let v = g.as_f64();
        v * v
    }).collect();
    let norm = sq.value().sqrt();
    if norm.is_finite() && norm > max_norm {
        let s = T::lit(max_norm / norm);
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// RMSprop state.
#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    pub lr: T,
    pub rho: T,
    pub eps: T,
    cache: Vec<T>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(n: usize, config: &TrainConfig) -> Self {
        Self {
            lr: T::lit(config.learning_rate),
            rho: T::lit(config.rho),
            eps: T::lit(config.epsilon),
            cache: vec![T::zero(); n],
        }
    }

    /// `v ← ρv + (1−ρ)g²; θ ← θ − η·g/(√v + ε)`
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        let one_minus = T::one() - self.rho;
        for ((p, &g), v) in params.iter_mut().zip(grad).zip(self.cache.iter_mut()) {
            *v = self.rho * *v + one_minus * g * g;
            *p -= self.lr * g / (v.sqrt() + self.eps);
        }
    }
}

/// Mini-batch RMSprop training with clipping and early stopping on the
/// validation loss (training loss when `val` is empty). The parameters of
/// the best epoch are restored before returning.
pub fn train<T: Real>(model: &mut Seq2SeqModel<T>, pairs: &[SeqPair], val: &[SeqPair], config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut opt = RmsProp::new(model.n_params(), config);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut history = TrainHistory { epochs: Vec::new(), best_epoch: 0, best_loss: f64::INFINITY, stopped_early: false };
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut total = CompensatedSum::default();
        let mut tokens = 0usize;
        let mut max_norm = 0.0f64;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&SeqPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let (loss, mut grad) = model.loss_and_grad(&batch)?;
            let norm = clip_gradients(&mut grad, config.clip_norm);
            if !loss.total.is_finite() || !norm.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss or gradient at epoch {epoch}, batch {}", bi + 1)));
            }
            max_norm = max_norm.max(norm);
            total.add(loss.total);
            tokens += loss.tokens;
            opt.step(&mut model.params, &grad);
        }
        let train_loss = total.value() / tokens as f64;
        let val_loss = if val.is_empty() { None } else { Some(model.evaluate_loss(val, config.batch_size)?) };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:?}");
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss, max_grad_norm: max_norm });
        let (improved, stop) = stopper.observe(monitored);
        if improved {
            best_params.clone_from(&model.params);
            history.best_epoch = epoch;
            history.best_loss = monitored;
        }
        if stop {
            history.stopped_early = true;
            break;
        }
        if config.stop_at_train_loss.is_some_and(|t| train_loss < t) {
            break;
        }
    }
    model.params = best_params;
    Ok(history)
}

//! Mini-batch training with best-on-validation selection.

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{backward, batch_loss, RnnModel, Sequence};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Sequences per optimizer step.
    pub batch: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Tensor names excluded from training, e.g. `lstm0.W_ii`.
    #[serde(default)]
    pub frozen: Vec<String>,
}

impl Default for TrainConfig {
    /// Desk scale: fewer epochs and a larger starting rate than
    /// [`TrainConfig::full_scale`].
    fn default() -> Self {
        Self {
            batch: 8,
            epochs: 60,
            lr_start: 1e-2,
            lr_end: 1e-4,
            weight_decay: 1e-3,
            seed: 0,
            frozen: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn full_scale() -> Self {
        Self {
            epochs: 300,
            lr_start: 1e-3,
            lr_end: 1e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("rnn.batch and rnn.epochs must be positive".into()));
        }
        let finite = [self.lr_start, self.lr_end, self.weight_decay].iter().all(|v| v.is_finite());
        if !finite || self.lr_start < 0.0 || self.lr_end < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rates and weight decay must be finite and >= 0".into()));
        }
        if self.lr_end > self.lr_start {
            return Err(Error::Config(format!(
                "lr_end {} exceeds lr_start {}",
                self.lr_end, self.lr_start
            )));
        }
        Ok(())
    }

    /// Learning rate of `epoch` (0-based), geometric from `lr_start` to
    /// `lr_end`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs == 1 || self.lr_start == 0.0 || self.lr_end == 0.0 {
            return if epoch + 1 == self.epochs && self.epochs > 1 { self.lr_end } else { self.lr_start };
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training batch loss, normalized units, dropout active.
    pub train_loss: f64,
    /// Validation loss, normalized units, inference mode.
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Trains `model` and returns the snapshot with the lowest validation
/// loss. Deterministic for a given `cfg.seed`.
pub fn train(model: &RnnModel, train_set: &[Sequence], val_set: &[Sequence], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyInput("training and validation sets must be non-empty".into()));
    }
    let names = model.params.names();
    if let Some(bad) = cfg.frozen.iter().find(|f| !names.contains(f)) {
        return Err(Error::Config(format!("unknown frozen tensor `{bad}`")));
    }
    let mut current = model.clone();
    let mut opt = AdamState::new(&current.params);
    let mut best = (batch_loss(&current, val_set, None)?, current.clone(), 0);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let shuffle_seed = derive_seed(cfg.seed, stream::SHUFFLE);
    let dropout_seed = derive_seed(cfg.seed, stream::DROPOUT);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let adam = AdamConfig {
            lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        };
        SimRng::new(derive_seed(shuffle_seed, epoch as u64)).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let seed = derive_seed(dropout_seed, ((epoch as u64) << 32) | b as u64);
            let (loss, grads) = backward(&current, &batch, Some(seed), &cfg.frozen)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("training loss diverged at epoch {epoch}")));
            }
            adam_step(&mut current.params, &grads, &mut opt, &adam, &cfg.frozen);
            loss_sum += loss;
            batches += 1;
        }
        let val_loss = batch_loss(&current, val_set, None)?;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches as f64,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, current.clone(), epoch + 1);
        }
    }
    Ok(TrainOutcome {
        model: best.1,
        history,
        best_epoch: best.2,
    })
}

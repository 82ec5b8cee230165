//! Mini-batch gradient descent with momentum and validation early stopping,
//! shared by the MLP and the LSTM.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Samples;
use crate::error::bail;
use crate::prelude::*;
use crate::rng::{stream_rng, tag};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    /// Share of training trials held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 10,
            patience: 20,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            bail!(Config, "learning rate must be positive and momentum in [0, 1)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            bail!(Config, "batch size and epoch count must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            bail!(Config, "validation fraction must be in [0, 1)");
        }
        Ok(())
    }
}

/// Per-epoch losses recorded during training.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Mean training cross-entropy over each epoch's mini-batches.
    pub train_loss: Vec<f64>,
    /// Held-out cross-entropy after each epoch (empty without a hold-out).
    pub validation_loss: Vec<f64>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub(crate) trait Network {
    type Workspace;

    fn workspace(&self) -> Self::Workspace;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Cross-entropy of one sample. When `grad` is given, the sample's
    /// gradient is added to it.
    fn sample_loss(&self, x: &[f64], label: usize, ws: &mut Self::Workspace, grad: Option<&mut [f64]>) -> f64;
}

/// Uniform Glorot initialisation `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rng: &mut impl Rng, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in out {
        *w = rng.random_range(-limit..limit);
    }
}

/// Log-softmax cross-entropy of `logits` for `label`; overwrites `logits`
/// with the softmax probabilities.
pub(crate) fn softmax_cross_entropy(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
    -(logits[label].ln())
}

pub(crate) fn softmax(logits: &mut [f64]) {
    softmax_cross_entropy(logits, 0);
}

/// Mean loss and gradient over the samples in `idx`.
pub(crate) fn loss_and_gradient<N: Network>(net: &N, samples: &Samples, idx: &[usize]) -> (f64, Vec<f64>) {
    let mut ws = net.workspace();
    let mut grad = vec![0.0; net.params().len()];
    let mut loss = 0.0;
    for &i in idx {
        loss += net.sample_loss(samples.sample(i), samples.labels()[i], &mut ws, Some(&mut grad));
    }
    let n = idx.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn mean_loss<N: Network>(net: &N, samples: &Samples, idx: &[usize], ws: &mut N::Workspace) -> f64 {
    idx.iter().map(|&i| net.sample_loss(samples.sample(i), samples.labels()[i], ws, None)).sum::<f64>()
        / idx.len().max(1) as f64
}

/// Splits sample indices into training and hold-out sets by whole trials.
fn holdout(samples: &Samples, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut trials = samples.trial_ids().to_vec();
    trials.sort_unstable();
    trials.dedup();
    if fraction <= 0.0 || trials.len() < 2 {
        return ((0..samples.len()).collect(), Vec::new());
    }
    trials.shuffle(&mut stream_rng(seed, &[tag::HOLDOUT]));
    let n_val = ((fraction * trials.len() as f64).ceil() as usize).clamp(1, trials.len() - 1);
    let held = &trials[..n_val];
    (0..samples.len()).partition(|&i| !held.contains(&samples.trial_ids()[i]))
}

pub(crate) fn train<N: Network>(net: &mut N, samples: &Samples, cfg: &TrainConfig, seed: u64) -> Result<TrainLog> {
    cfg.validate()?;
    if samples.is_empty() {
        bail!(Input, "no training samples");
    }
    let (mut train_idx, val_idx) = holdout(samples, cfg.validation_fraction, seed);
    let mut ws = net.workspace();
    let n_params = net.params().len();
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut stream_rng(seed, &[tag::SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            grad.fill(0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += net.sample_loss(samples.sample(i), samples.labels()[i], &mut ws, Some(&mut grad));
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                bail!(NonFinite, "training loss became {loss} at epoch {epoch}, batch {b} (learning rate {})", cfg.learning_rate);
            }
            epoch_loss += loss;
            let scale = cfg.learning_rate / batch.len() as f64;
            for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - scale * g;
                *p += *v;
            }
        }
        log.train_loss.push(epoch_loss / train_idx.len() as f64);

        if val_idx.is_empty() {
            log.best_epoch = epoch;
            continue;
        }
        let val = mean_loss(net, samples, &val_idx, &mut ws);
        if !val.is_finite() {
            bail!(NonFinite, "validation loss became {val} at epoch {epoch}");
        }
        log.validation_loss.push(val);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, net.params().to_vec()));
            log.best_epoch = epoch;
        } else if epoch - log.best_epoch >= cfg.patience {
            break;
        }
    }
    if let Some((_, params)) = best {
        net.params_mut().copy_from_slice(&params);
    }
    Ok(log)
}

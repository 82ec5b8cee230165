use serde::{Deserialize, Serialize};

use super::net::{glorot, loss_and_gradient, softmax, softmax_cross_entropy, train, Network, TrainConfig, TrainLog};
use super::{Classifier, Samples};
use crate::error::bail;
use crate::prelude::*;
use crate::rng::{stream_rng, tag};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![64], train: TrainConfig { learning_rate: 1e-2, ..TrainConfig::default() } }
    }
}

/// Feed-forward network: ReLU hidden layers and a softmax output.
///
/// Parameters are stored flat, layer by layer, as the weight matrix
/// (`out × in`, row-major) followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

pub struct MlpWorkspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Mlp {
    /// Randomly initialised network.
    pub fn new(input: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Result<Mlp> {
        if input == 0 || n_classes < 2 || hidden.contains(&0) {
            bail!(Config, "MLP needs non-empty layers and at least two classes");
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let total = sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        let mut params = vec![0.0; total];
        let mut rng = stream_rng(seed, &[tag::INIT]);
        let mut at = 0;
        for p in sizes.windows(2) {
            glorot(&mut rng, &mut params[at..at + p[0] * p[1]], p[0], p[1]);
            at += p[0] * p[1] + p[1];
        }
        Ok(Mlp { sizes, params })
    }

    pub fn fit(train_set: &Samples, n_classes: usize, cfg: &MlpConfig, seed: u64) -> Result<(Mlp, TrainLog)> {
        let mut net = Mlp::new(train_set.sample_len(), &cfg.hidden, n_classes, seed)?;
        let log = train(&mut net, train_set, &cfg.train, seed)?;
        Ok((net, log))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mean cross-entropy over `idx` and its gradient with respect to [`Self::params`].
    pub fn loss_and_gradient(&self, samples: &Samples, idx: &[usize]) -> (f64, Vec<f64>) {
        loss_and_gradient(self, samples, idx)
    }

    /// Cross-entropy over `idx` without gradients.
    pub fn loss(&self, samples: &Samples, idx: &[usize]) -> f64 {
        let mut ws = self.workspace();
        idx.iter().map(|&i| self.sample_loss(samples.sample(i), samples.labels()[i], &mut ws, None)).sum::<f64>()
            / idx.len().max(1) as f64
    }

    fn forward(&self, x: &[f64], ws: &mut MlpWorkspace) {
        ws.acts[0].copy_from_slice(x);
        let last = self.sizes.len() - 2;
        let mut at = 0;
        for (l, p) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (p[0], p[1]);
            let (w, b) = self.params[at..at + n_in * n_out + n_out].split_at(n_in * n_out);
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let input = &prev[l];
            for (o, out) in next[0].iter_mut().enumerate() {
                let z = b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                *out = if l < last { z.max(0.0) } else { z };
            }
            at += n_in * n_out + n_out;
        }
    }
}

impl Network for Mlp {
    type Workspace = MlpWorkspace;

    fn workspace(&self) -> MlpWorkspace {
        MlpWorkspace {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn sample_loss(&self, x: &[f64], label: usize, ws: &mut MlpWorkspace, grad: Option<&mut [f64]>) -> f64 {
        self.forward(x, ws);
        let layers = self.sizes.len() - 1;
        let out = &mut ws.acts[layers];
        let loss = softmax_cross_entropy(out, label);
        let Some(grad) = grad else { return loss };

        ws.deltas[layers].copy_from_slice(out);
        ws.deltas[layers][label] -= 1.0;
        let mut at: usize = self.sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            at -= n_in * n_out + n_out;
            let w = &self.params[at..at + n_in * n_out];
            let (gw, gb) = grad[at..at + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let (lower, upper) = ws.deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let input = &ws.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let prev = &mut lower[l];
                prev.fill(0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    for (p, wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wv;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        loss
    }
}

impl Classifier for Mlp {
    fn n_classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn predict_proba(&self, sample: &[f64]) -> Vec<f64> {
        let mut ws = self.workspace();
        self.forward(sample, &mut ws);
        let mut out = ws.acts.pop().unwrap();
        softmax(&mut out);
        out
    }
}

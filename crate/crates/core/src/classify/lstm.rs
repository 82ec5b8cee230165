use serde::{Deserialize, Serialize};

use super::net::{glorot, loss_and_gradient, softmax, softmax_cross_entropy, train, Network, TrainConfig, TrainLog};
use super::{Classifier, Samples};
use crate::error::bail;
use crate::prelude::*;
use crate::rng::{stream_rng, tag};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmConfig {
    pub hidden: usize,
    /// Consecutive feature windows per input sequence.
    pub sequence_len: usize,
    pub train: TrainConfig,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden: 32,
            sequence_len: 8,
            train: TrainConfig { learning_rate: 5e-3, ..TrainConfig::default() },
        }
    }
}

/// Single-layer LSTM whose final hidden state feeds a softmax layer.
///
/// Gates are stacked in the order input, forget, cell, output. The flat
/// parameter vector holds `W` (`4H × D`), `U` (`4H × H`), `b` (`4H`),
/// then the output layer `V` (`C × H`) and `c` (`C`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    input: usize,
    hidden: usize,
    n_classes: usize,
    params: Vec<f64>,
}

pub struct LstmWorkspace {
    gates: Vec<f64>,
    cells: Vec<f64>,
    hs: Vec<f64>,
    tanh_c: Vec<f64>,
    logits: Vec<f64>,
    dz: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dh_prev: Vec<f64>,
}

struct Layout {
    w: usize,
    u: usize,
    b: usize,
    v: usize,
    c: usize,
    end: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    for (x, y) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail = n - n % 4;
    let rest: f64 = a[tail..].iter().zip(&b[tail..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

impl Lstm {
    pub fn new(input: usize, hidden: usize, n_classes: usize, seed: u64) -> Result<Lstm> {
        if input == 0 || hidden == 0 || n_classes < 2 {
            bail!(Config, "LSTM needs positive input and hidden sizes and at least two classes");
        }
        let mut net = Lstm { input, hidden, n_classes, params: Vec::new() };
        let lay = net.layout();
        net.params = vec![0.0; lay.end];
        let mut rng = stream_rng(seed, &[tag::INIT]);
        let h4 = 4 * hidden;
        glorot(&mut rng, &mut net.params[lay.w..lay.u], input, h4);
        glorot(&mut rng, &mut net.params[lay.u..lay.b], hidden, h4);
        net.params[lay.b + hidden..lay.b + 2 * hidden].fill(1.0);
        glorot(&mut rng, &mut net.params[lay.v..lay.c], hidden, n_classes);
        Ok(net)
    }

    pub fn fit(train_set: &Samples, n_classes: usize, cfg: &LstmConfig, seed: u64) -> Result<(Lstm, TrainLog)> {
        let mut net = Lstm::new(train_set.features(), cfg.hidden, n_classes, seed)?;
        let log = train(&mut net, train_set, &cfg.train, seed)?;
        Ok((net, log))
    }

    fn layout(&self) -> Layout {
        let h4 = 4 * self.hidden;
        let w = 0;
        let u = w + h4 * self.input;
        let b = u + h4 * self.hidden;
        let v = b + h4;
        let c = v + self.n_classes * self.hidden;
        Layout { w, u, b, v, c, end: c + self.n_classes }
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
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

    pub fn loss(&self, samples: &Samples, idx: &[usize]) -> f64 {
        let mut ws = self.workspace();
        idx.iter().map(|&i| self.sample_loss(samples.sample(i), samples.labels()[i], &mut ws, None)).sum::<f64>()
            / idx.len().max(1) as f64
    }

    fn ensure(&self, ws: &mut LstmWorkspace, steps: usize) {
        let h = self.hidden;
        ws.gates.resize(steps * 4 * h, 0.0);
        ws.cells.resize((steps + 1) * h, 0.0);
        ws.hs.resize((steps + 1) * h, 0.0);
        ws.tanh_c.resize(steps * h, 0.0);
    }

    /// Runs the recurrence and leaves output logits in `ws.logits`.
    fn forward(&self, x: &[f64], ws: &mut LstmWorkspace) -> usize {
        let (d, h) = (self.input, self.hidden);
        let steps = x.len() / d;
        self.ensure(ws, steps);
        let lay = self.layout();
        let p = &self.params;
        ws.cells[..h].fill(0.0);
        ws.hs[..h].fill(0.0);
        for t in 0..steps {
            let xt = &x[t * d..(t + 1) * d];
            let (hs_prev, hs_next) = ws.hs.split_at_mut((t + 1) * h);
            let h_prev = &hs_prev[t * h..];
            let gates = &mut ws.gates[t * 4 * h..(t + 1) * 4 * h];
            for (r, z) in gates.iter_mut().enumerate() {
                *z = p[lay.b + r]
                    + dot(&p[lay.w + r * d..lay.w + (r + 1) * d], xt)
                    + dot(&p[lay.u + r * h..lay.u + (r + 1) * h], h_prev);
            }
            let (cp, cn) = ws.cells.split_at_mut((t + 1) * h);
            let c_prev = &cp[t * h..];
            for j in 0..h {
                let i = sigmoid(gates[j]);
                let f = sigmoid(gates[h + j]);
                let g = gates[2 * h + j].tanh();
                let o = sigmoid(gates[3 * h + j]);
                gates[j] = i;
                gates[h + j] = f;
                gates[2 * h + j] = g;
                gates[3 * h + j] = o;
                let c = f * c_prev[j] + i * g;
                cn[j] = c;
                let tc = c.tanh();
                ws.tanh_c[t * h + j] = tc;
                hs_next[j] = o * tc;
            }
        }
        let h_last = &ws.hs[steps * h..(steps + 1) * h];
        ws.logits.resize(self.n_classes, 0.0);
        for (k, out) in ws.logits.iter_mut().enumerate() {
            *out = p[lay.c + k] + dot(&p[lay.v + k * h..lay.v + (k + 1) * h], h_last);
        }
        steps
    }
}

impl Network for Lstm {
    type Workspace = LstmWorkspace;

    fn workspace(&self) -> LstmWorkspace {
        let h = self.hidden;
        LstmWorkspace {
            gates: Vec::new(),
            cells: Vec::new(),
            hs: Vec::new(),
            tanh_c: Vec::new(),
            logits: Vec::new(),
            dz: vec![0.0; 4 * h],
            dh: vec![0.0; h],
            dc: vec![0.0; h],
            dh_prev: vec![0.0; h],
        }
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn sample_loss(&self, x: &[f64], label: usize, ws: &mut LstmWorkspace, grad: Option<&mut [f64]>) -> f64 {
        let steps = self.forward(x, ws);
        let loss = softmax_cross_entropy(&mut ws.logits, label);
        let Some(grad) = grad else { return loss };

        let (d, h) = (self.input, self.hidden);
        let lay = self.layout();
        let p = &self.params;
        ws.logits[label] -= 1.0;
        let h_last = &ws.hs[steps * h..(steps + 1) * h];
        ws.dh.fill(0.0);
        for k in 0..self.n_classes {
            let dk = ws.logits[k];
            grad[lay.c + k] += dk;
            axpy(dk, h_last, &mut grad[lay.v + k * h..lay.v + (k + 1) * h]);
            axpy(dk, &p[lay.v + k * h..lay.v + (k + 1) * h], &mut ws.dh);
        }
        ws.dc.fill(0.0);
        for t in (0..steps).rev() {
            let gates = &ws.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_prev = &ws.cells[t * h..(t + 1) * h];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = ws.tanh_c[t * h + j];
                let dh = ws.dh[j];
                let dc = ws.dc[j] + dh * o * (1.0 - tc * tc);
                ws.dz[j] = dc * g * i * (1.0 - i);
                ws.dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                ws.dz[2 * h + j] = dc * i * (1.0 - g * g);
                ws.dz[3 * h + j] = dh * tc * o * (1.0 - o);
                ws.dc[j] = dc * f;
            }
            let xt = &x[t * d..(t + 1) * d];
            let h_prev = &ws.hs[t * h..(t + 1) * h];
            ws.dh_prev.fill(0.0);
            for r in 0..4 * h {
                let dz = ws.dz[r];
                if dz == 0.0 {
                    continue;
                }
                grad[lay.b + r] += dz;
                axpy(dz, xt, &mut grad[lay.w + r * d..lay.w + (r + 1) * d]);
                axpy(dz, h_prev, &mut grad[lay.u + r * h..lay.u + (r + 1) * h]);
                axpy(dz, &p[lay.u + r * h..lay.u + (r + 1) * h], &mut ws.dh_prev);
            }
            core::mem::swap(&mut ws.dh, &mut ws.dh_prev);
        }
        loss
    }
}

impl Classifier for Lstm {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, sample: &[f64]) -> Vec<f64> {
        let mut ws = self.workspace();
        self.forward(sample, &mut ws);
        let mut out = ws.logits;
        softmax(&mut out);
        out
    }
}

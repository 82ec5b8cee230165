//! Classifiers (kNN, MLP, LSTM), trial-level cross-validation and
//! classification reports.
//!
//! Every classifier outputs a probability vector per sample, which is what the
//! fusion rule consumes. A sample is `steps × features` values: one window for
//! kNN and MLP, a run of consecutive windows of one trial for the LSTM.

mod cv;
mod knn;
mod lstm;
mod metrics;
mod mlp;
mod net;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, cross_validate_with, CvConfig, CvReport, FoldResult, Predictions, Summary};
pub use knn::{Knn, KnnConfig};
pub use lstm::{Lstm, LstmConfig};
pub use metrics::{report_metrics, Averages, ClassMetrics, ClassificationReport, ConfusionMatrix};
pub use mlp::{Mlp, MlpConfig};
pub use net::{TrainConfig, TrainLog};

use crate::error::bail;
use crate::prelude::*;
use crate::signal::FeatureMatrix;
use crate::Result;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn n_classes(&self) -> usize;

    /// Class probabilities for one sample; non-negative and summing to one.
    fn predict_proba(&self, sample: &[f64]) -> Vec<f64>;

    fn predict(&self, sample: &[f64]) -> usize {
        argmax(&self.predict_proba(sample))
    }

    fn predict_proba_all(&self, samples: &Samples) -> Vec<Vec<f64>> {
        (0..samples.len()).map(|i| self.predict_proba(samples.sample(i))).collect()
    }
}

/// Classifier inputs cut from a [`FeatureMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    steps: usize,
    features: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    trial_ids: Vec<u32>,
    anchors: Vec<usize>,
}

impl Samples {
    /// Builds samples from raw parts; `data` holds `labels.len() × steps × features` values.
    pub fn new(steps: usize, features: usize, data: Vec<f64>, labels: Vec<usize>, trial_ids: Vec<u32>) -> Result<Self> {
        if steps == 0 || data.len() != labels.len() * steps * features || trial_ids.len() != labels.len() {
            bail!(Input, "sample buffer does not match {} samples of {steps}×{features}", labels.len());
        }
        let anchors = (0..labels.len()).collect();
        Ok(Samples { steps, features, data, labels, trial_ids, anchors })
    }

    /// One sample per matrix row.
    pub fn windows(m: &FeatureMatrix) -> Samples {
        Samples {
            steps: 1,
            features: m.n_cols(),
            data: m.data().to_vec(),
            labels: m.labels().to_vec(),
            trial_ids: m.trial_ids().to_vec(),
            anchors: (0..m.n_rows()).collect(),
        }
    }

    /// Every run of `len` consecutive windows of one trial (stride 1),
    /// labelled by its final window. Runs never cross trial boundaries.
    pub fn sequences(m: &FeatureMatrix, len: usize) -> Result<Samples> {
        if len == 0 {
            bail!(Config, "sequence length must be at least 1");
        }
        let mut order: Vec<usize> = (0..m.n_rows()).collect();
        // group by trial in order of first appearance, then by window start
        let mut first_seen = alloc::collections::BTreeMap::new();
        for (i, &t) in m.trial_ids().iter().enumerate() {
            first_seen.entry(t).or_insert(i);
        }
        order.sort_by_key(|&i| (first_seen[&m.trial_ids()[i]], m.window_starts()[i]));
        let mut out = Samples {
            steps: len,
            features: m.n_cols(),
            data: Vec::new(),
            labels: Vec::new(),
            trial_ids: Vec::new(),
            anchors: Vec::new(),
        };
        for run in order.chunk_by(|&a, &b| m.trial_ids()[a] == m.trial_ids()[b]) {
            for end in len.saturating_sub(1)..run.len() {
                for &r in &run[end + 1 - len..=end] {
                    out.data.extend_from_slice(m.row(r));
                }
                let last = run[end];
                out.labels.push(m.labels()[last]);
                out.trial_ids.push(m.trial_ids()[last]);
                out.anchors.push(last);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn sample_len(&self) -> usize {
        self.steps * self.features
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn trial_ids(&self) -> &[u32] {
        &self.trial_ids
    }

    /// Source matrix row of each sample (the final window for sequences).
    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(idx.len() * self.sample_len());
        for &i in idx {
            data.extend_from_slice(self.sample(i));
        }
        Samples {
            steps: self.steps,
            features: self.features,
            data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            trial_ids: idx.iter().map(|&i| self.trial_ids[i]).collect(),
            anchors: idx.iter().map(|&i| self.anchors[i]).collect(),
        }
    }
}

/// Which classifier to train, with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Knn(KnnConfig),
    Mlp(MlpConfig),
    Lstm(LstmConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Knn(_) => "knn",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Lstm(_) => "lstm",
        }
    }

    /// Cuts a scaled feature matrix into the inputs this model expects.
    pub fn samples(&self, m: &FeatureMatrix) -> Result<Samples> {
        match self {
            ModelSpec::Lstm(c) => Samples::sequences(m, c.sequence_len),
            _ => Ok(Samples::windows(m)),
        }
    }

    pub fn fit(&self, train: &Samples, n_classes: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            ModelSpec::Knn(c) => Model::Knn(Knn::fit(train, n_classes, c)?),
            ModelSpec::Mlp(c) => Model::Mlp(Mlp::fit(train, n_classes, c, seed)?.0),
            ModelSpec::Lstm(c) => Model::Lstm(Lstm::fit(train, n_classes, c, seed)?.0),
        })
    }
}

/// A fitted classifier of any kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Model {
    Knn(Knn),
    Mlp(Mlp),
    Lstm(Lstm),
}

impl Classifier for Model {
    fn n_classes(&self) -> usize {
        match self {
            Model::Knn(m) => m.n_classes(),
            Model::Mlp(m) => m.n_classes(),
            Model::Lstm(m) => m.n_classes(),
        }
    }

    fn predict_proba(&self, sample: &[f64]) -> Vec<f64> {
        match self {
            Model::Knn(m) => m.predict_proba(sample),
            Model::Mlp(m) => m.predict_proba(sample),
            Model::Lstm(m) => m.predict_proba(sample),
        }
    }

    fn predict(&self, sample: &[f64]) -> usize {
        match self {
            Model::Knn(m) => m.predict(sample),
            Model::Mlp(m) => m.predict(sample),
            Model::Lstm(m) => m.predict(sample),
        }
    }
}

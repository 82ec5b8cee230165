use serde::{Deserialize, Serialize};

use crate::error::bail;
use crate::prelude::*;
use crate::Result;

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; n_classes]; n_classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|r| r.len() != counts.len()) {
            bail!(Input, "confusion matrix must be square and non-empty");
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_predictions(n_classes: usize, truth: &[usize], predicted: &[usize]) -> Self {
        let mut m = ConfusionMatrix::new(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t, p);
        }
        m
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    pub confusion: ConfusionMatrix,
    /// Zero-division cases, reported as 0 in the metrics.
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
}

pub fn report_metrics(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if cm.n_classes() == 0 || total == 0 {
        bail!(Input, "cannot report metrics for an empty confusion matrix");
    }
    let mut warnings = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|c| {
            let tp = cm.counts[c][c];
            let support = cm.support(c);
            let precision = ratio(tp, cm.predicted(c)).unwrap_or_else(|| {
                warnings.push(format!("class {c}: no predictions, precision set to 0"));
                0.0
            });
            let recall = ratio(tp, support).unwrap_or_else(|| {
                warnings.push(format!("class {c}: no true samples, recall set to 0"));
                0.0
            });
            ClassMetrics { precision, recall, f1: f1(precision, recall), support }
        })
        .collect();
    let k = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    // pooled over classes: every wrong prediction is one FP and one FN
    let tp = cm.correct();
    let fp = total - tp;
    let micro_p = tp as f64 / (tp + fp) as f64;
    let micro_r = tp as f64 / (tp + fp) as f64;
    Ok(ClassificationReport {
        accuracy: tp as f64 / total as f64,
        per_class,
        macro_avg,
        micro_avg: Averages { precision: micro_p, recall: micro_r, f1: f1(micro_p, micro_r) },
        confusion: cm.clone(),
        warnings,
    })
}

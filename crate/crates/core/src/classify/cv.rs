use serde::{Deserialize, Serialize};

use super::metrics::{report_metrics, ClassificationReport, ConfusionMatrix};
use super::{argmax, Classifier, ModelSpec, Samples};
use crate::error::bail;
use crate::prelude::*;
use crate::rng::derive_seed;
use crate::signal::{split_trials, FeatureMatrix, Scaler};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
    /// Not serialised; set by the caller.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, seed: 0 }
    }
}

/// Out-of-fold predictions, one per evaluated sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub proba: Vec<Vec<f64>>,
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    pub trial_ids: Vec<u32>,
    /// Row of the input matrix each prediction belongs to.
    pub rows: Vec<usize>,
}

impl Predictions {
    fn extend(&mut self, other: Predictions) {
        self.proba.extend(other.proba);
        self.predicted.extend(other.predicted);
        self.truth.extend(other.truth);
        self.trial_ids.extend(other.trial_ids);
        self.rows.extend(other.rows);
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn accuracy(&self) -> f64 {
        let hits = self.truth.iter().zip(&self.predicted).filter(|(a, b)| a == b).count();
        hits as f64 / self.len().max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_trials: Vec<u32>,
    pub report: ClassificationReport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub accuracy: Summary,
    pub macro_precision: Summary,
    pub macro_recall: Summary,
    pub macro_f1: Summary,
    /// Confusion matrix pooled over all folds.
    pub pooled: ConfusionMatrix,
    pub predictions: Predictions,
    pub warnings: Vec<String>,
}

/// Trial-level k-fold cross-validation of a [`ModelSpec`].
///
/// Each fold fits a [`Scaler`] on its training rows only.
pub fn cross_validate(spec: &ModelSpec, m: &FeatureMatrix, cfg: &CvConfig) -> Result<CvReport> {
    cross_validate_with(m, cfg, |fm| spec.samples(fm), |train, n_classes, seed| spec.fit(train, n_classes, seed))
}

/// Cross-validation with caller-supplied sample construction and fitting.
///
/// `fit` receives the training samples, the class count of the whole
/// matrix and a per-fold seed.
pub fn cross_validate_with<C, S, F>(m: &FeatureMatrix, cfg: &CvConfig, samples: S, mut fit: F) -> Result<CvReport>
where
    C: Classifier,
    S: Fn(&FeatureMatrix) -> Result<Samples>,
    F: FnMut(&Samples, usize, u64) -> Result<C>,
{
    if m.is_empty() {
        bail!(Input, "cannot cross-validate an empty feature matrix");
    }
    let n_classes = m.labels().iter().max().map_or(0, |&l| l + 1).max(2);
    let folds = split_trials(&m.unique_trials(), cfg.folds, cfg.seed)?;
    let mut results = Vec::with_capacity(folds.len());
    let mut pooled = ConfusionMatrix::new(n_classes);
    let mut all = Predictions::default();
    let mut warnings = Vec::new();

    for (f, test_trials) in folds.iter().enumerate() {
        let (test_rows, train_rows): (Vec<usize>, Vec<usize>) =
            (0..m.n_rows()).partition(|&i| test_trials.binary_search(&m.trial_ids()[i]).is_ok());
        let scaler = Scaler::fit(&m.select_rows(&train_rows))?;
        let train = samples(&scaler.apply(&m.select_rows(&train_rows))?)?;
        let test = samples(&scaler.apply(&m.select_rows(&test_rows))?)?;
        if train.is_empty() || test.is_empty() {
            bail!(Input, "fold {f} has no training or no test samples");
        }
        let model = fit(&train, n_classes, derive_seed(cfg.seed, &[f as u64]))?;
        let proba = model.predict_proba_all(&test);
        let preds = Predictions {
            predicted: proba.iter().map(|p| argmax(p)).collect(),
            proba,
            truth: test.labels().to_vec(),
            trial_ids: test.trial_ids().to_vec(),
            rows: test.anchors().iter().map(|&a| test_rows[a]).collect(),
        };
        let cm = ConfusionMatrix::from_predictions(n_classes, &preds.truth, &preds.predicted);
        let report = report_metrics(&cm)?;
        for c in (0..n_classes).filter(|&c| cm.support(c) == 0) {
            warnings.push(format!("fold {f}: class {c} missing from the test set"));
        }
        warnings.extend(report.warnings.iter().map(|w| format!("fold {f}: {w}")));
        pooled.merge(&cm);
        all.extend(preds);
        results.push(FoldResult { fold: f, test_trials: test_trials.clone(), report });
    }

    let collect = |g: fn(&ClassificationReport) -> f64| Summary::of(&results.iter().map(|r| g(&r.report)).collect::<Vec<_>>());
    Ok(CvReport {
        accuracy: collect(|r| r.accuracy),
        macro_precision: collect(|r| r.macro_avg.precision),
        macro_recall: collect(|r| r.macro_avg.recall),
        macro_f1: collect(|r| r.macro_avg.f1),
        folds: results,
        pooled,
        predictions: all,
        warnings,
    })
}

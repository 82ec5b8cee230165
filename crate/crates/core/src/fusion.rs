//! Decision-level EEG/EMG fusion.
//!
//! Each modality's classifier yields a probability vector. The fused label
//! comes from whichever modality has the larger truthiness `w / N`, where the
//! weight `w` reflects the modality's cross-validated accuracy and `N` how
//! noisy the unseen trial is compared with the training trials.

use serde::{Deserialize, Serialize};

use crate::classify::{argmax, Classifier, Model, ModelSpec};
use crate::error::bail;
use crate::features::{EegFeatureConfig, EmgFeatureConfig, FeatureExtractor};
use crate::prelude::*;
use crate::rng::derive_seed;
use crate::signal::{split_trials, Modality, Recording, Scaler, StageSegmentation, Trial};
use crate::synth::add_gaussian_noise;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub eeg: f64,
    pub emg: f64,
}

impl FusionWeights {
    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::Eeg => self.eeg,
            Modality::Emg => self.emg,
        }
    }
}

/// Weights proportional to each modality's cross-validated accuracy.
pub fn fusion_weights(a_eeg: f64, a_emg: f64) -> Result<FusionWeights> {
    if !(a_eeg > 0.0 && a_eeg <= 1.0 && a_emg > 0.0 && a_emg <= 1.0) {
        bail!(Input, "accuracies must lie in (0, 1], got EEG {a_eeg} and EMG {a_emg}");
    }
    let eeg = a_eeg / (a_eeg + a_emg);
    Ok(FusionWeights { eeg, emg: 1.0 - eeg })
}

/// Mean absolute successive difference per channel, averaged over channels.
pub fn mean_fluctuation(rec: &Recording) -> Result<f64> {
    if rec.len() < 2 {
        bail!(Input, "trial {} needs at least two samples to measure fluctuation", rec.trial_id);
    }
    let per_channel = rec.samples.iter().map(|ch| ch.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / (ch.len() - 1) as f64);
    Ok(per_channel.sum::<f64>() / rec.samples.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisinessBaseline {
    pub modality: Modality,
    /// Mean over training trials of [`mean_fluctuation`].
    pub fluctuation: f64,
}

pub fn noisiness_baseline<'a>(
    modality: Modality,
    training: impl IntoIterator<Item = &'a Recording>,
) -> Result<NoisinessBaseline> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for rec in training {
        if rec.modality != modality {
            bail!(Input, "trial {} is {} but the baseline is for {modality}", rec.trial_id, rec.modality);
        }
        sum += mean_fluctuation(rec)?;
        n += 1;
    }
    if n == 0 {
        bail!(Input, "no training trials for the {modality} noisiness baseline");
    }
    let fluctuation = sum / n as f64;
    if !(fluctuation > 0.0) {
        bail!(Input, "{modality} training trials are constant; the noisiness baseline would be zero");
    }
    Ok(NoisinessBaseline { modality, fluctuation })
}

/// Degree of noisiness of an unseen trial; 1 means "as smooth as training".
pub fn noisiness(unseen: &Recording, baseline: &NoisinessBaseline) -> Result<f64> {
    if unseen.modality != baseline.modality {
        bail!(Input, "trial {} is {} but the baseline is for {}", unseen.trial_id, unseen.modality, baseline.modality);
    }
    Ok(mean_fluctuation(unseen)? / baseline.fluctuation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceDecision {
    pub modality: Modality,
    pub proba: Vec<f64>,
    pub noisiness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedDecision {
    pub label: usize,
    pub chosen: Modality,
    pub truthiness_eeg: f64,
    pub truthiness_emg: f64,
    /// Truthiness values were equal and the tie rule decided.
    pub tie: bool,
}

/// `w / N`, with a silent trial (`N = 0`) counted as infinitely trustworthy.
pub fn truthiness(weight: f64, noisiness: f64) -> f64 {
    if noisiness == 0.0 { f64::INFINITY } else { weight / noisiness }
}

/// Picks the modality with the larger truthiness and returns its argmax.
///
/// Equal truthiness goes to the heavier modality, then to EMG.
pub fn fuse(eeg: &SourceDecision, emg: &SourceDecision, w: &FusionWeights) -> Result<FusedDecision> {
    if eeg.modality != Modality::Eeg || emg.modality != Modality::Emg {
        bail!(Input, "fuse expects an EEG and an EMG decision");
    }
    if eeg.proba.len() != emg.proba.len() || eeg.proba.is_empty() {
        bail!(Input, "EEG has {} classes but EMG has {}", eeg.proba.len(), emg.proba.len());
    }
    if eeg.noisiness < 0.0 || emg.noisiness < 0.0 || eeg.noisiness.is_nan() || emg.noisiness.is_nan() {
        bail!(Input, "noisiness must be non-negative");
    }
    let t_eeg = truthiness(w.eeg, eeg.noisiness);
    let t_emg = truthiness(w.emg, emg.noisiness);
    let tie = t_eeg == t_emg;
    let chosen = if tie {
        if w.eeg > w.emg { Modality::Eeg } else { Modality::Emg }
    } else if t_eeg > t_emg {
        Modality::Eeg
    } else {
        Modality::Emg
    };
    let proba = if chosen == Modality::Eeg { &eeg.proba } else { &emg.proba };
    Ok(FusedDecision { label: argmax(proba), chosen, truthiness_eeg: t_eeg, truthiness_emg: t_emg, tie })
}

/// Which test recordings receive Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseCase {
    Clean,
    EegNoise,
    EmgNoise,
    Both,
}

impl NoiseCase {
    pub const ALL: [NoiseCase; 4] = [NoiseCase::Clean, NoiseCase::EegNoise, NoiseCase::EmgNoise, NoiseCase::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseCase::Clean => "clean",
            NoiseCase::EegNoise => "eeg-noise",
            NoiseCase::EmgNoise => "emg-noise",
            NoiseCase::Both => "both",
        }
    }

    pub fn modality_noised(self) -> &'static str {
        match self {
            NoiseCase::Clean => "none",
            NoiseCase::EegNoise => "eeg",
            NoiseCase::EmgNoise => "emg",
            NoiseCase::Both => "both",
        }
    }

    pub fn noises(self, m: Modality) -> bool {
        matches!((self, m), (NoiseCase::Both, _) | (NoiseCase::EegNoise, Modality::Eeg) | (NoiseCase::EmgNoise, Modality::Emg))
    }

    pub fn parse(s: &str) -> Option<NoiseCase> {
        NoiseCase::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Feature columns and classifier for one modality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub model: ModelSpec,
    /// Restrict the classifier to these feature columns.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { model: ModelSpec::Lstm(Default::default()), columns: None }
    }
}

/// Feature extraction, scaling and a classifier fitted on clean training trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePipeline {
    pub extractor: FeatureExtractor,
    pub columns: Vec<String>,
    pub scaler: Scaler,
    pub spec: ModelSpec,
    pub model: Model,
}

/// Predictions for one recording, stamped with the centre time of each
/// sample's final window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SourceOutput {
    pub times_s: Vec<f64>,
    pub proba: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl SourcePipeline {
    pub fn fit(
        modality: Modality,
        training: &[&Trial],
        eeg: &EegFeatureConfig,
        emg: &EmgFeatureConfig,
        source: &SourceConfig,
        n_classes: usize,
        seed: u64,
    ) -> Result<SourcePipeline> {
        let pairs: Vec<_> = training.iter().map(|t| (t.recording(modality), t.stages(modality))).collect();
        let extractor = FeatureExtractor::fit(modality, eeg, emg, &pairs)?;
        let columns = source.columns.clone().unwrap_or_else(|| extractor.feature_names());
        let m = extractor.extract_all(pairs.iter().copied())?.select_features(&columns)?;
        let scaler = Scaler::fit(&m)?;
        let samples = source.model.samples(&scaler.apply(&m)?)?;
        let model = source.model.fit(&samples, n_classes, seed)?;
        Ok(SourcePipeline { extractor, columns, scaler, spec: source.model.clone(), model })
    }

    pub fn predict(&self, rec: &Recording, seg: &StageSegmentation) -> Result<SourceOutput> {
        let m = self.scaler.apply(&self.extractor.extract(rec, seg)?.select_features(&self.columns)?)?;
        let samples = self.spec.samples(&m)?;
        let width = self.extractor.window().in_samples(rec.sampling_rate_hz)?.width;
        Ok(SourceOutput {
            times_s: samples
                .anchors()
                .iter()
                .map(|&a| (m.window_starts()[a] as f64 + width as f64 / 2.0) / rec.sampling_rate_hz)
                .collect(),
            proba: self.model.predict_proba_all(&samples),
            labels: samples.labels().to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub folds: usize,
    /// Noise standard deviation as a multiple of the training fluctuation.
    pub alpha: f64,
    pub cases: Vec<NoiseCase>,
    pub eeg_features: EegFeatureConfig,
    pub emg_features: EmgFeatureConfig,
    pub eeg: SourceConfig,
    pub emg: SourceConfig,
    /// Not serialised; set by the caller.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            folds: 10,
            alpha: 3.0,
            cases: NoiseCase::ALL.to_vec(),
            eeg_features: EegFeatureConfig::default(),
            emg_features: EmgFeatureConfig::default(),
            eeg: SourceConfig::default(),
            emg: SourceConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub case: NoiseCase,
    pub noise_alpha: f64,
    pub acc_eeg: f64,
    pub acc_emg: f64,
    pub acc_fused: f64,
    pub mean_n_eeg: f64,
    pub mean_n_emg: f64,
    /// Share of evaluation points where EEG supplied the fused label.
    pub eeg_share: f64,
    pub ties: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// Mean clean cross-validation accuracy over folds, on each modality's own samples.
    pub cv_accuracy_eeg: f64,
    pub cv_accuracy_emg: f64,
    pub weights: FusionWeights,
    pub rows: Vec<ScenarioRow>,
}

impl ScenarioReport {
    pub fn row(&self, case: NoiseCase) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.case == case)
    }
}

struct TrialOutcome {
    eeg: SourceOutput,
    emg: SourceOutput,
    n_eeg: f64,
    n_emg: f64,
}

fn own_accuracy(outputs: &[&SourceOutput]) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for o in outputs {
        total += o.labels.len();
        hits += o.proba.iter().zip(&o.labels).filter(|(p, &l)| argmax(p) == l).count();
    }
    hits as f64 / total.max(1) as f64
}

/// Index of the time in sorted `times` closest to `t`; earlier wins ties.
fn nearest(times: &[f64], t: f64) -> usize {
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        0
    } else if i == times.len() || t - times[i - 1] <= times[i] - t {
        i - 1
    } else {
        i
    }
}

/// Trains both modalities on clean training folds, then evaluates every
/// noise case on the held-out trials.
///
/// Evaluation points are the EMG predictions, each paired with the nearest
/// EEG prediction in time and scored against the EMG stage label.
pub fn run_fusion_scenarios(trials: &[Trial], cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    if !(cfg.alpha >= 0.0) {
        bail!(Config, "noise alpha must be non-negative, got {}", cfg.alpha);
    }
    if cfg.cases.is_empty() {
        bail!(Config, "no noise cases requested");
    }
    let ids: Vec<u32> = trials.iter().map(|t| t.id).collect();
    let folds = split_trials(&ids, cfg.folds, cfg.seed)?;
    let n_classes = crate::signal::Stage::COUNT;
    let mut outcomes: Vec<Vec<TrialOutcome>> = cfg.cases.iter().map(|_| Vec::new()).collect();
    let mut fold_acc = (Vec::new(), Vec::new());

    for (f, test_ids) in folds.iter().enumerate() {
        let (test, train): (Vec<&Trial>, Vec<&Trial>) = trials.iter().partition(|t| test_ids.binary_search(&t.id).is_ok());
        let seed = derive_seed(cfg.seed, &[f as u64]);
        let fit = |m: Modality, src: &SourceConfig| {
            SourcePipeline::fit(m, &train, &cfg.eeg_features, &cfg.emg_features, src, n_classes, seed)
        };
        let eeg = fit(Modality::Eeg, &cfg.eeg)?;
        let emg = fit(Modality::Emg, &cfg.emg)?;
        let base_eeg = noisiness_baseline(Modality::Eeg, train.iter().map(|t| &t.eeg))?;
        let base_emg = noisiness_baseline(Modality::Emg, train.iter().map(|t| &t.emg))?;

        let mut clean: Vec<(SourceOutput, SourceOutput)> = Vec::new();
        for t in &test {
            clean.push((eeg.predict(&t.eeg, &t.eeg_stages)?, emg.predict(&t.emg, &t.emg_stages)?));
        }
        fold_acc.0.push(own_accuracy(&clean.iter().map(|c| &c.0).collect::<Vec<_>>()));
        fold_acc.1.push(own_accuracy(&clean.iter().map(|c| &c.1).collect::<Vec<_>>()));

        for (c, case) in cfg.cases.iter().enumerate() {
            for (t, (clean_eeg, clean_emg)) in test.iter().zip(&clean) {
                let run = |m: Modality, pipe: &SourcePipeline, base: &NoisinessBaseline, clean: &SourceOutput| -> Result<(SourceOutput, f64)> {
                    let rec = t.recording(m);
                    if case.noises(m) && cfg.alpha > 0.0 {
                        let noisy = add_gaussian_noise(rec, cfg.alpha, base, cfg.seed)?;
                        Ok((pipe.predict(&noisy, t.stages(m))?, noisiness(&noisy, base)?))
                    } else {
                        Ok((clean.clone(), noisiness(rec, base)?))
                    }
                };
                let (eeg_out, n_eeg) = run(Modality::Eeg, &eeg, &base_eeg, clean_eeg)?;
                let (emg_out, n_emg) = run(Modality::Emg, &emg, &base_emg, clean_emg)?;
                outcomes[c].push(TrialOutcome { eeg: eeg_out, emg: emg_out, n_eeg, n_emg });
            }
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cv_accuracy_eeg = mean(&fold_acc.0);
    let cv_accuracy_emg = mean(&fold_acc.1);
    let weights = fusion_weights(cv_accuracy_eeg.max(f64::MIN_POSITIVE), cv_accuracy_emg.max(f64::MIN_POSITIVE))?;

    let mut rows = Vec::with_capacity(cfg.cases.len());
    for (case, outs) in cfg.cases.iter().zip(&outcomes) {
        let (mut total, mut hit_eeg, mut hit_emg, mut hit_fused, mut eeg_chosen, mut ties) = (0usize, 0, 0, 0, 0, 0);
        for o in outs {
            if o.eeg.times_s.is_empty() {
                bail!(Input, "a test trial produced no EEG predictions");
            }
            for (k, &t) in o.emg.times_s.iter().enumerate() {
                let j = nearest(&o.eeg.times_s, t);
                let label = o.emg.labels[k];
                let d_eeg = SourceDecision { modality: Modality::Eeg, proba: o.eeg.proba[j].clone(), noisiness: o.n_eeg };
                let d_emg = SourceDecision { modality: Modality::Emg, proba: o.emg.proba[k].clone(), noisiness: o.n_emg };
                let fused = fuse(&d_eeg, &d_emg, &weights)?;
                total += 1;
                hit_eeg += usize::from(argmax(&d_eeg.proba) == label);
                hit_emg += usize::from(argmax(&d_emg.proba) == label);
                hit_fused += usize::from(fused.label == label);
                eeg_chosen += usize::from(fused.chosen == Modality::Eeg);
                ties += usize::from(fused.tie);
            }
        }
        let frac = |h: usize| h as f64 / total.max(1) as f64;
        rows.push(ScenarioRow {
            case: *case,
            noise_alpha: if *case == NoiseCase::Clean { 0.0 } else { cfg.alpha },
            acc_eeg: frac(hit_eeg),
            acc_emg: frac(hit_emg),
            acc_fused: frac(hit_fused),
            mean_n_eeg: outs.iter().map(|o| o.n_eeg).sum::<f64>() / outs.len() as f64,
            mean_n_emg: outs.iter().map(|o| o.n_emg).sum::<f64>() / outs.len() as f64,
            eeg_share: frac(eeg_chosen),
            ties,
        });
    }
    Ok(ScenarioReport { cv_accuracy_eeg, cv_accuracy_emg, weights, rows })
}

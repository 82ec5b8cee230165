//! Recordings, stage segmentation, windowing, feature matrices and the
//! trial-level split/scale bookkeeping shared by the rest of the crate.

use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::bail;
use crate::prelude::*;
use crate::rng::{stream_rng, tag};
use crate::{Error, Result};

/// EEG channels used by the EEG feature preset.
pub const EEG_CHANNELS: [&str; 7] = ["C3", "C4", "Cz", "CP1", "CP2", "CP5", "CP6"];

/// EMG channels used by the EMG feature preset.
pub const EMG_CHANNELS: [&str; 5] = [
    "Anterior Deltoid",
    "Brachioradialis",
    "Flexor Digitorum Profundis",
    "Common Extensor Digitorum",
    "First Dorsal Interosseous",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Eeg,
    Emg,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Eeg => "eeg",
            Modality::Emg => "emg",
        }
    }

    /// Channel names the feature preset for this modality expects.
    pub fn preset_channels(self) -> &'static [&'static str] {
        match self {
            Modality::Eeg => &EEG_CHANNELS,
            Modality::Emg => &EMG_CHANNELS,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eeg" => Ok(Modality::Eeg),
            "emg" => Ok(Modality::Emg),
            other => bail!(Input, "unknown modality `{other}` (expected eeg or emg)"),
        }
    }
}

/// One trial of one modality: channels × time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub modality: Modality,
    pub channel_names: Vec<String>,
    pub sampling_rate_hz: f64,
    /// One vector per channel, all of equal length.
    pub samples: Vec<Vec<f64>>,
    pub trial_id: u32,
}

impl Recording {
    pub fn new(
        modality: Modality,
        channel_names: Vec<String>,
        sampling_rate_hz: f64,
        samples: Vec<Vec<f64>>,
        trial_id: u32,
    ) -> Result<Self> {
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            bail!(Input, "trial {trial_id}: sampling rate must be positive, got {sampling_rate_hz}");
        }
        if channel_names.len() != samples.len() {
            bail!(
                Input,
                "trial {trial_id}: {} channel names for {} channels",
                channel_names.len(),
                samples.len()
            );
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|c| c.len() != first.len()) {
                bail!(Input, "trial {trial_id}: channels have different lengths");
            }
        }
        Ok(Recording { modality, channel_names, sampling_rate_hz, samples, trial_id })
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sampling_rate_hz
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.samples[self.channel_index(name)?])
    }

    /// Keeps only the named channels, in the given order.
    pub fn select_channels(&self, names: &[&str]) -> Result<Recording> {
        let samples = names
            .iter()
            .map(|n| self.channel(n).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Recording {
            modality: self.modality,
            channel_names: names.iter().map(|n| n.to_string()).collect(),
            sampling_rate_hz: self.sampling_rate_hz,
            samples,
            trial_id: self.trial_id,
        })
    }

    /// Truncates every channel to `len` samples.
    pub fn cropped(&self, len: usize) -> Recording {
        let mut out = self.clone();
        for ch in &mut out.samples {
            ch.truncate(len);
        }
        out
    }
}

/// The four movement stages of a reach-grasp-lift-return trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Stage {
    Resting = 0,
    Extension = 1,
    Lifting = 2,
    Flexion = 3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Resting, Stage::Extension, Stage::Lifting, Stage::Flexion];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Resting => "resting",
            Stage::Extension => "extension",
            Stage::Lifting => "lifting",
            Stage::Flexion => "flexion",
        }
    }
}

/// Three boundaries splitting a trial into the four stages.
///
/// A boundary sample belongs to the later stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSegmentation {
    boundaries: [usize; 3],
}

impl StageSegmentation {
    pub fn new(boundaries: [usize; 3], trial_len: usize) -> Result<Self> {
        let [b1, b2, b3] = boundaries;
        if !(0 < b1 && b1 < b2 && b2 < b3 && b3 < trial_len) {
            bail!(
                Input,
                "stage boundaries {boundaries:?} must satisfy 0 < b1 < b2 < b3 < {trial_len}"
            );
        }
        Ok(StageSegmentation { boundaries })
    }

    pub fn boundaries(&self) -> [usize; 3] {
        self.boundaries
    }

    pub fn stage_of(&self, sample: usize) -> Stage {
        let stage = self.boundaries.iter().filter(|&&b| sample >= b).count();
        Stage::ALL[stage]
    }

    /// Half-open sample range `[start, end)` of a stage, given the trial length.
    pub fn stage_range(&self, stage: Stage, trial_len: usize) -> core::ops::Range<usize> {
        let [b1, b2, b3] = self.boundaries;
        match stage {
            Stage::Resting => 0..b1,
            Stage::Extension => b1..b2,
            Stage::Lifting => b2..b3,
            Stage::Flexion => b3..trial_len,
        }
    }
}

/// A trial's paired EEG and EMG recordings with their stage segmentations.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub id: u32,
    pub eeg: Recording,
    pub emg: Recording,
    pub eeg_stages: StageSegmentation,
    pub emg_stages: StageSegmentation,
}

impl Trial {
    pub fn recording(&self, modality: Modality) -> &Recording {
        match modality {
            Modality::Eeg => &self.eeg,
            Modality::Emg => &self.emg,
        }
    }

    pub fn stages(&self, modality: Modality) -> &StageSegmentation {
        match modality {
            Modality::Eeg => &self.eeg_stages,
            Modality::Emg => &self.emg_stages,
        }
    }
}

/// Sliding-window width and overlap in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub width_s: f64,
    pub overlap_s: f64,
}

/// A [`WindowSpec`] resolved against a sampling rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSamples {
    pub width: usize,
    pub step: usize,
    /// Set when rounding to whole samples moved width or step by more than 1%.
    pub inexact: bool,
}

impl WindowSpec {
    pub const EEG: WindowSpec = WindowSpec { width_s: 0.1, overlap_s: 0.08 };
    pub const EMG: WindowSpec = WindowSpec { width_s: 0.2, overlap_s: 0.15 };

    pub fn new(width_s: f64, overlap_s: f64) -> Result<Self> {
        if !(width_s > 0.0 && width_s.is_finite()) {
            bail!(Config, "window width must be positive, got {width_s}");
        }
        if !(0.0..width_s).contains(&overlap_s) {
            bail!(Config, "window overlap {overlap_s} must be in [0, {width_s})");
        }
        Ok(WindowSpec { width_s, overlap_s })
    }

    pub fn step_s(&self) -> f64 {
        self.width_s - self.overlap_s
    }

    pub fn in_samples(&self, sampling_rate_hz: f64) -> Result<WindowSamples> {
        WindowSpec::new(self.width_s, self.overlap_s)?;
        let exact_w = self.width_s * sampling_rate_hz;
        let exact_s = self.step_s() * sampling_rate_hz;
        let width = exact_w.round() as usize;
        let step = exact_s.round() as usize;
        if width < 2 {
            bail!(Config, "window of {} s at {sampling_rate_hz} Hz is under 2 samples", self.width_s);
        }
        if step < 1 {
            bail!(Config, "window step of {} s at {sampling_rate_hz} Hz rounds to zero", self.step_s());
        }
        let off = |exact: f64, got: usize| (got as f64 - exact).abs() / exact;
        let inexact = off(exact_w, width) > 0.01 || off(exact_s, step) > 0.01;
        Ok(WindowSamples { width, step, inexact })
    }
}

/// Number of windows of `width` samples at `step` that fit in `len` samples.
pub fn window_count(len: usize, width: usize, step: usize) -> usize {
    if len < width || step == 0 {
        0
    } else {
        (len - width) / step + 1
    }
}

/// Start indices of every window, in increasing order.
pub fn window_starts(len: usize, width: usize, step: usize) -> impl Iterator<Item = usize> {
    (0..window_count(len, width, step)).map(move |i| i * step)
}

/// Stage of the window's centre sample `start + width / 2`.
pub fn label_window(start_index: usize, width: usize, seg: &StageSegmentation) -> Stage {
    seg.stage_of(start_index + width / 2)
}

/// A fixed-width slice of one channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window<'a> {
    pub channel: &'a str,
    pub samples: &'a [f64],
    pub start_index: usize,
    pub label: Stage,
}

/// Cuts every channel of `rec` into labelled windows.
pub fn slide_windows<'a>(
    rec: &'a Recording,
    spec: &WindowSpec,
    seg: &StageSegmentation,
) -> Result<Vec<Vec<Window<'a>>>> {
    let ws = spec.in_samples(rec.sampling_rate_hz)?;
    let len = rec.len();
    if len < ws.width {
        return Err(Error::TrialTooShort { trial_id: rec.trial_id, len, width: ws.width });
    }
    Ok(rec
        .channel_names
        .iter()
        .zip(&rec.samples)
        .map(|(name, data)| {
            window_starts(len, ws.width, ws.step)
                .map(|start| Window {
                    channel: name.as_str(),
                    samples: &data[start..start + ws.width],
                    start_index: start,
                    label: label_window(start, ws.width, seg),
                })
                .collect()
        })
        .collect())
}

/// Rows are windows (or window sequences), columns are named features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    data: Vec<f64>,
    labels: Vec<usize>,
    trial_ids: Vec<u32>,
    window_starts: Vec<usize>,
}

impl FeatureMatrix {
    pub fn empty(feature_names: Vec<String>) -> Self {
        FeatureMatrix {
            feature_names,
            data: Vec::new(),
            labels: Vec::new(),
            trial_ids: Vec::new(),
            window_starts: Vec::new(),
        }
    }

    /// Builds a matrix from row-major data, rejecting ragged or non-finite input.
    pub fn from_rows(
        feature_names: Vec<String>,
        data: Vec<f64>,
        labels: Vec<usize>,
        trial_ids: Vec<u32>,
        window_starts: Vec<usize>,
    ) -> Result<Self> {
        let cols = feature_names.len();
        let rows = labels.len();
        if trial_ids.len() != rows || window_starts.len() != rows || data.len() != rows * cols {
            bail!(
                Input,
                "feature matrix shape mismatch: {} values, {rows} labels, {} trial ids, {} starts, {cols} columns",
                data.len(),
                trial_ids.len(),
                window_starts.len()
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(
                NonFinite,
                "feature `{}` in row {} is {}",
                feature_names[i % cols.max(1)],
                i / cols.max(1),
                data[i]
            );
        }
        let mut seen = alloc::collections::BTreeSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            bail!(Input, "duplicate feature name `{dup}`");
        }
        Ok(FeatureMatrix { feature_names, data, labels, trial_ids, window_starts })
    }

    pub fn push_row(&mut self, row: &[f64], label: usize, trial_id: u32, window_start: usize) -> Result<()> {
        if row.len() != self.n_cols() {
            bail!(Input, "row has {} values, matrix has {} columns", row.len(), self.n_cols());
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            bail!(
                NonFinite,
                "feature `{}` of trial {trial_id} at sample {window_start} is {}",
                self.feature_names[j],
                row[j]
            );
        }
        self.data.extend_from_slice(row);
        self.labels.push(label);
        self.trial_ids.push(trial_id);
        self.window_starts.push(window_start);
        Ok(())
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.feature_names != self.feature_names {
            bail!(FeatureMismatch, "cannot append matrices with different columns");
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        self.trial_ids.extend_from_slice(&other.trial_ids);
        self.window_starts.extend_from_slice(&other.window_starts);
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn trial_ids(&self) -> &[u32] {
        &self.trial_ids
    }

    pub fn window_starts(&self) -> &[usize] {
        &self.window_starts
    }

    /// Distinct trial ids in ascending order.
    pub fn unique_trials(&self) -> Vec<u32> {
        let mut ids = self.trial_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        FeatureMatrix {
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            data,
            labels: self.labels.clone(),
            trial_ids: self.trial_ids.clone(),
            window_starts: self.window_starts.clone(),
        }
    }

    /// Keeps the named columns, in the given order.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref()).ok_or_else(|| {
                    Error::FeatureMismatch(format!("unknown feature `{}`", n.as_ref()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            data,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            trial_ids: rows.iter().map(|&i| self.trial_ids[i]).collect(),
            window_starts: rows.iter().map(|&i| self.window_starts[i]).collect(),
        }
    }

    /// Rows whose trial id satisfies `keep`.
    pub fn filter_trials(&self, keep: impl Fn(u32) -> bool) -> FeatureMatrix {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(self.trial_ids[i])).collect();
        self.select_rows(&rows)
    }
}

/// Per-feature standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations below this are treated as constant columns.
pub const MIN_STD: f64 = 1e-12;

impl Scaler {
    /// Fits column means and population standard deviations.
    pub fn fit(train: &FeatureMatrix) -> Result<Scaler> {
        if train.is_empty() {
            bail!(Input, "cannot fit a scaler on an empty matrix");
        }
        let n = train.n_rows() as f64;
        let cols = train.n_cols();
        let mut mean = vec![0.0; cols];
        for r in train.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for r in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Scaler { feature_names: train.feature_names.clone(), mean, std })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.feature_names != self.feature_names {
            bail!(FeatureMismatch, "scaler was fitted on different features");
        }
        let mut out = m.clone();
        let cols = m.n_cols();
        for (i, v) in out.data.iter_mut().enumerate() {
            let j = i % cols;
            *v = (*v - self.mean[j]) / self.std[j];
        }
        Ok(out)
    }

    /// Scales one row in place.
    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Partitions the distinct `trial_ids` into `k` folds whose sizes differ by at
/// most one. Deterministic for a given seed.
pub fn split_trials(trial_ids: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    let mut ids = trial_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if k < 2 || k > ids.len() {
        bail!(Config, "fold count {k} must be between 2 and the trial count {}", ids.len());
    }
    ids.shuffle(&mut stream_rng(seed, &[tag::SPLIT]));
    let (q, r) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = ids.as_slice();
    for f in 0..k {
        let (head, tail) = rest.split_at(q + usize::from(f < r));
        let mut fold = head.to_vec();
        fold.sort_unstable();
        folds.push(fold);
        rest = tail;
    }
    Ok(folds)
}

//! Per-window feature computations and the EEG/EMG preset pipelines.
//!
//! EEG windows get three time-domain statistics, five spectral features from
//! a Welch estimate and two Haar wavelet energies (10 per channel). EMG
//! windows get five time-domain features (5 per channel). Columns are named
//! `<channel>_<feature>` and ordered channel-major.

use serde::{Deserialize, Serialize};

use crate::dsp::{
    default_segment_len, haar_dwt_level1, simpson_integrate, Complex64, FftPlan, PsdEstimate, Welch,
    WelchConfig, WindowFn,
};
use crate::error::bail;
use crate::linalg::solve_psd;
use crate::prelude::*;
use crate::signal::{slide_windows, FeatureMatrix, Modality, Recording, Stage, StageSegmentation, WindowSpec};
use crate::{Error, Result};

/// Per-channel feature names of the EEG preset, in column order.
pub const EEG_FEATURES: [&str; 10] =
    ["MAV", "SD", "V", "ASB_alpha", "ASB_beta", "PPSD", "FPPSD", "SE", "E_cA", "E_cD"];

/// Per-channel feature names of the EMG preset, in column order.
pub const EMG_FEATURES: [&str; 5] = ["MAV", "WL", "WA", "MAS", "AR1"];

pub fn mav(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.iter().map(|v| v.abs()).sum::<f64>() / w.len() as f64
}

/// Population variance.
pub fn variance(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Population standard deviation.
pub fn std_dev(w: &[f64]) -> f64 {
    variance(w).sqrt()
}

pub fn waveform_length(w: &[f64]) -> Result<f64> {
    if w.len() < 2 {
        bail!(Input, "waveform length needs at least two samples, got {}", w.len());
    }
    Ok(w.windows(2).map(|p| (p[1] - p[0]).abs()).sum())
}

/// Number of successive differences whose magnitude is at least `threshold`.
pub fn willison_amplitude(w: &[f64], threshold: f64) -> Result<usize> {
    if w.len() < 2 {
        bail!(Input, "Willison amplitude needs at least two samples, got {}", w.len());
    }
    if !(threshold > 0.0) {
        bail!(Config, "Willison threshold must be positive, got {threshold}");
    }
    Ok(w.windows(2).filter(|p| (p[1] - p[0]).abs() >= threshold).count())
}

/// Differences of consecutive window MAVs: `MAV[k+1] - MAV[k]`.
pub fn mav_slope(window_mavs: &[f64]) -> Result<Vec<f64>> {
    if window_mavs.len() < 2 {
        bail!(Input, "MAV slope needs at least two windows, got {}", window_mavs.len());
    }
    Ok(window_mavs.windows(2).map(|p| p[1] - p[0]).collect())
}

/// Least-squares autoregressive fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ArFit {
    /// `a_1..a_P` in `x_i ≈ Σ a_p x_{i-p}`.
    pub coefficients: Vec<f64>,
    /// Set when the lagged design matrix is rank deficient. Lags that are
    /// linear combinations of shorter lags get coefficient zero; an all-zero
    /// window yields all zeros.
    pub degenerate: bool,
}

/// Fits `x_i = Σ_{p=1..P} a_p x_{i-p} + w_i` by ordinary least squares on the
/// lagged design matrix (no intercept).
pub fn ar_coefficients(w: &[f64], order: usize) -> Result<ArFit> {
    if order == 0 {
        bail!(Config, "AR order must be at least 1");
    }
    if w.len() <= 3 * order {
        bail!(Input, "AR({order}) needs more than {} samples, got {}", 3 * order, w.len());
    }
    let mut gram = vec![0.0; order * order];
    let mut rhs = vec![0.0; order];
    for i in order..w.len() {
        let target = w[i];
        for a in 0..order {
            let xa = w[i - 1 - a];
            rhs[a] += xa * target;
            for b in a..order {
                gram[a * order + b] += xa * w[i - 1 - b];
            }
        }
    }
    for a in 0..order {
        for b in 0..a {
            gram[a * order + b] = gram[b * order + a];
        }
    }
    let (coefficients, rank) = solve_psd(&gram, &rhs, 1e-10);
    Ok(ArFit { coefficients, degenerate: rank < order })
}

/// Indices of the PSD bins inside `[lo, hi]`.
fn band_bins(psd: &PsdEstimate, lo: f64, hi: f64) -> core::ops::Range<usize> {
    let start = psd.freqs_hz.partition_point(|&f| f < lo);
    let end = psd.freqs_hz.partition_point(|&f| f <= hi);
    start..end.max(start)
}

/// Absolute sub-band power: Simpson integral of the PSD over the bins in `[lo, hi]`.
pub fn subband_power(psd: &PsdEstimate, band: [f64; 2]) -> Result<f64> {
    let [lo, hi] = band;
    if !(lo < hi) {
        bail!(Config, "band [{lo}, {hi}] is empty");
    }
    let top = psd.freqs_hz.last().copied().unwrap_or(0.0);
    if lo < psd.freqs_hz.first().copied().unwrap_or(0.0) || hi > top {
        bail!(Input, "band [{lo}, {hi}] Hz lies outside the PSD range [0, {top}]");
    }
    let bins = band_bins(psd, lo, hi);
    if bins.len() < 2 {
        bail!(Input, "band [{lo}, {hi}] Hz covers fewer than two PSD bins");
    }
    Ok(simpson_integrate(&psd.power[bins.clone()], &psd.freqs_hz[bins])?.max(0.0))
}

/// Peak PSD above `low_cut_hz` and its frequency. The lowest frequency wins ties.
pub fn peak_psd(psd: &PsdEstimate, low_cut_hz: f64) -> Result<(f64, f64)> {
    let start = psd.freqs_hz.partition_point(|&f| f < low_cut_hz);
    if start >= psd.power.len() {
        bail!(Input, "no PSD bins at or above {low_cut_hz} Hz");
    }
    let mut best = start;
    for k in start + 1..psd.power.len() {
        if psd.power[k] > psd.power[best] {
            best = k;
        }
    }
    Ok((psd.power[best], psd.freqs_hz[best]))
}

/// Spectral energy `Σ_k |X_k|²` over all DFT bins (equal to `N Σ x²`).
pub fn spectral_energy(w: &[f64]) -> f64 {
    spectral_energy_with(&FftPlan::new(w.len()), w)
}

fn spectral_energy_with(plan: &FftPlan, w: &[f64]) -> f64 {
    let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).sum()
}

/// Log-energies `ln(1 + Σ c²)` of the level-1 Haar approximation and detail
/// coefficients.
pub fn dwt_features(w: &[f64]) -> (f64, f64) {
    let (approx, detail) = haar_dwt_level1(w);
    let energy = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().ln_1p();
    (energy(&approx), energy(&detail))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EegFeatureConfig {
    pub window: WindowSpec,
    pub alpha_band: [f64; 2],
    pub beta_band: [f64; 2],
    /// PSD bins below this are ignored when locating the peak.
    pub low_cut_hz: f64,
    /// Transform length the Welch segments are zero-padded to.
    pub nfft: usize,
    pub welch_window: WindowFn,
    pub channels: Vec<String>,
}

impl Default for EegFeatureConfig {
    fn default() -> Self {
        EegFeatureConfig {
            window: WindowSpec::EEG,
            alpha_band: [8.0, 12.0],
            beta_band: [12.0, 30.0],
            low_cut_hz: 1.0,
            nfft: 512,
            welch_window: WindowFn::Hann,
            channels: Modality::Eeg.preset_channels().iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmgFeatureConfig {
    pub window: WindowSpec,
    pub ar_order: usize,
    /// Absolute Willison threshold. When unset, each channel uses the standard
    /// deviation of its resting-stage training samples.
    pub willison_threshold: Option<f64>,
    pub channels: Vec<String>,
}

impl Default for EmgFeatureConfig {
    fn default() -> Self {
        EmgFeatureConfig {
            window: WindowSpec::EMG,
            ar_order: 4,
            willison_threshold: None,
            channels: Modality::Emg.preset_channels().iter().map(|c| c.to_string()).collect(),
        }
    }
}

/// Column names `<channel>_<feature>` in channel-major order.
pub fn column_names(channels: &[String], features: &[&str]) -> Vec<String> {
    channels.iter().flat_map(|c| features.iter().map(move |f| format!("{c}_{f}"))).collect()
}

struct EegKernel {
    welch: Welch,
    se_plan: FftPlan,
    alpha: [f64; 2],
    beta: [f64; 2],
    low_cut: f64,
}

impl EegKernel {
    fn new(cfg: &EegFeatureConfig, fs: f64, width: usize) -> Result<Self> {
        let segment = default_segment_len(fs, cfg.alpha_band[0], width);
        let welch_cfg = WelchConfig { segment_len: segment, overlap: segment / 2, window: cfg.welch_window, nfft: Some(cfg.nfft) };
        Ok(EegKernel {
            welch: Welch::new(fs, &welch_cfg)?,
            se_plan: FftPlan::new(width),
            alpha: cfg.alpha_band,
            beta: cfg.beta_band,
            low_cut: cfg.low_cut_hz,
        })
    }

    fn compute(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let psd = self.welch.estimate(w)?;
        let (ppsd, fppsd) = peak_psd(&psd, self.low_cut)?;
        let (e_ca, e_cd) = dwt_features(w);
        let var = variance(w);
        out.copy_from_slice(&[
            mav(w),
            var.sqrt(),
            var,
            subband_power(&psd, self.alpha)?,
            subband_power(&psd, self.beta)?,
            ppsd,
            fppsd,
            spectral_energy_with(&self.se_plan, w),
            e_ca,
            e_cd,
        ]);
        Ok(())
    }
}

/// Windowed EEG preset features for one recording.
pub fn extract_eeg_features(
    rec: &Recording,
    seg: &StageSegmentation,
    cfg: &EegFeatureConfig,
) -> Result<FeatureMatrix> {
    let channels: Vec<&str> = cfg.channels.iter().map(String::as_str).collect();
    let rec = rec.select_channels(&channels)?;
    let windows = slide_windows(&rec, &cfg.window, seg)?;
    let width = windows[0][0].samples.len();
    let kernel = EegKernel::new(cfg, rec.sampling_rate_hz, width)?;
    let per = EEG_FEATURES.len();
    let cols = per * channels.len();
    let n = windows[0].len();
    let mut data = vec![0.0; n * cols];
    for (c, ch_windows) in windows.iter().enumerate() {
        for (i, w) in ch_windows.iter().enumerate() {
            let at = i * cols + c * per;
            kernel.compute(w.samples, &mut data[at..at + per])?;
        }
    }
    assemble(column_names(&cfg.channels, &EEG_FEATURES), data, &windows[0], rec.trial_id)
}

/// Per-channel Willison thresholds: the configured absolute value, or the
/// standard deviation of each channel's resting-stage samples pooled over
/// the training recordings.
pub fn willison_thresholds(
    cfg: &EmgFeatureConfig,
    training: &[(&Recording, &StageSegmentation)],
) -> Result<Vec<f64>> {
    if let Some(t) = cfg.willison_threshold {
        if !(t > 0.0) {
            bail!(Config, "Willison threshold must be positive, got {t}");
        }
        return Ok(vec![t; cfg.channels.len()]);
    }
    if training.is_empty() {
        bail!(Input, "no training recordings to derive Willison thresholds from");
    }
    cfg.channels
        .iter()
        .map(|ch| {
            let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
            for (rec, seg) in training {
                let data = rec.channel(ch)?;
                for &v in &data[seg.stage_range(Stage::Resting, data.len())] {
                    n += 1;
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / n.max(1) as f64;
            let sd = (sq / n.max(1) as f64 - mean * mean).max(0.0).sqrt();
            if sd > 0.0 {
                Ok(sd)
            } else {
                Err(Error::Input(format!("channel `{ch}` is flat during rest; set an absolute Willison threshold")))
            }
        })
        .collect()
}

/// Windowed EMG preset features for one recording.
///
/// The preset keeps one scalar per feature: `MAS` is the slope to the next
/// window (the last window repeats the previous slope) and `AR1` is the first
/// autoregressive coefficient.
pub fn extract_emg_features(
    rec: &Recording,
    seg: &StageSegmentation,
    cfg: &EmgFeatureConfig,
    thresholds: &[f64],
) -> Result<FeatureMatrix> {
    if thresholds.len() != cfg.channels.len() {
        bail!(Config, "{} Willison thresholds for {} channels", thresholds.len(), cfg.channels.len());
    }
    let channels: Vec<&str> = cfg.channels.iter().map(String::as_str).collect();
    let rec = rec.select_channels(&channels)?;
    let windows = slide_windows(&rec, &cfg.window, seg)?;
    let per = EMG_FEATURES.len();
    let cols = per * channels.len();
    let n = windows[0].len();
    let mut data = vec![0.0; n * cols];
    for (c, ch_windows) in windows.iter().enumerate() {
        let mavs: Vec<f64> = ch_windows.iter().map(|w| mav(w.samples)).collect();
        let slopes = if n >= 2 { mav_slope(&mavs)? } else { vec![0.0] };
        for (i, w) in ch_windows.iter().enumerate() {
            let at = i * cols + c * per;
            data[at..at + per].copy_from_slice(&[
                mavs[i],
                waveform_length(w.samples)?,
                willison_amplitude(w.samples, thresholds[c])? as f64,
                slopes[i.min(slopes.len() - 1)],
                ar_coefficients(w.samples, cfg.ar_order)?.coefficients[0],
            ]);
        }
    }
    assemble(column_names(&cfg.channels, &EMG_FEATURES), data, &windows[0], rec.trial_id)
}

fn assemble(
    names: Vec<String>,
    data: Vec<f64>,
    windows: &[crate::signal::Window<'_>],
    trial_id: u32,
) -> Result<FeatureMatrix> {
    FeatureMatrix::from_rows(
        names,
        data,
        windows.iter().map(|w| w.label.index()).collect(),
        vec![trial_id; windows.len()],
        windows.iter().map(|w| w.start_index).collect(),
    )
}

/// A ready-to-run preset: the EEG configuration, or the EMG configuration
/// together with its fitted Willison thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureExtractor {
    Eeg(EegFeatureConfig),
    Emg { config: EmgFeatureConfig, thresholds: Vec<f64> },
}

impl FeatureExtractor {
    /// Prepares the preset for `modality`, fitting anything that depends on
    /// training data from `training`.
    pub fn fit(
        modality: Modality,
        eeg: &EegFeatureConfig,
        emg: &EmgFeatureConfig,
        training: &[(&Recording, &StageSegmentation)],
    ) -> Result<Self> {
        Ok(match modality {
            Modality::Eeg => FeatureExtractor::Eeg(eeg.clone()),
            Modality::Emg => {
                FeatureExtractor::Emg { config: emg.clone(), thresholds: willison_thresholds(emg, training)? }
            }
        })
    }

    pub fn modality(&self) -> Modality {
        match self {
            FeatureExtractor::Eeg(_) => Modality::Eeg,
            FeatureExtractor::Emg { .. } => Modality::Emg,
        }
    }

    pub fn window(&self) -> WindowSpec {
        match self {
            FeatureExtractor::Eeg(c) => c.window,
            FeatureExtractor::Emg { config, .. } => config.window,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self {
            FeatureExtractor::Eeg(c) => column_names(&c.channels, &EEG_FEATURES),
            FeatureExtractor::Emg { config, .. } => column_names(&config.channels, &EMG_FEATURES),
        }
    }

    pub fn extract(&self, rec: &Recording, seg: &StageSegmentation) -> Result<FeatureMatrix> {
        if rec.modality != self.modality() {
            bail!(Input, "trial {} is {} but the extractor expects {}", rec.trial_id, rec.modality, self.modality());
        }
        match self {
            FeatureExtractor::Eeg(c) => extract_eeg_features(rec, seg, c),
            FeatureExtractor::Emg { config, thresholds } => extract_emg_features(rec, seg, config, thresholds),
        }
    }

    /// Stacks the features of many recordings, in the given order.
    pub fn extract_all<'a>(
        &self,
        recordings: impl IntoIterator<Item = (&'a Recording, &'a StageSegmentation)>,
    ) -> Result<FeatureMatrix> {
        let mut out = FeatureMatrix::empty(self.feature_names());
        for (rec, seg) in recordings {
            out.append(&self.extract(rec, seg)?)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn psd_of(x: &[f64], fs: f64) -> PsdEstimate {
        crate::dsp::welch_psd(x, fs, &WelchConfig::new(x.len()).with_nfft(512)).unwrap()
    }

    #[test]
    fn time_domain_examples() {
        assert_eq!(mav(&[1.0, -1.0, 1.0, -1.0]), 1.0);
        assert_eq!(mav(&[0.0; 5]), 0.0);
        assert_eq!(variance(&[3.0; 4]), 0.0);
        assert_eq!(variance(&[0.0, 2.0]), 1.0);
        assert_eq!(std_dev(&[0.0, 2.0]), 1.0);
        assert_eq!(waveform_length(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 3.0);
        assert_eq!(waveform_length(&[0.0, 5.0]).unwrap(), 5.0);
        assert!(waveform_length(&[1.0]).is_err());
    }

    #[test]
    fn willison_examples() {
        assert_eq!(willison_amplitude(&[0.0, 0.5, 0.0, 0.5], 0.3).unwrap(), 3);
        assert_eq!(willison_amplitude(&[2.0; 6], 0.3).unwrap(), 0);
        assert_eq!(willison_amplitude(&[0.0, 0.3], 0.3).unwrap(), 1);
        assert!(willison_amplitude(&[0.0, 1.0], 0.0).is_err());
        assert!(willison_amplitude(&[0.0], 1.0).is_err());
    }

    #[test]
    fn mav_slope_examples() {
        assert_eq!(mav_slope(&[1.0, 3.0, 2.0]).unwrap(), [2.0, -1.0]);
        assert_eq!(mav_slope(&[4.0; 4]).unwrap(), [0.0; 3]);
        assert!(mav_slope(&[1.0]).is_err());
    }

    #[test]
    fn ar_recovers_known_process() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut x = vec![0.0; 10_000];
        for i in 2..x.len() {
            let w: f64 = StandardNormal.sample(&mut rng);
            x[i] = 0.5 * x[i - 1] - 0.25 * x[i - 2] + w;
        }
        let fit = ar_coefficients(&x, 2).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.coefficients[0] - 0.5).abs() < 0.05);
        assert!((fit.coefficients[1] + 0.25).abs() < 0.05);

        let noise: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = ar_coefficients(&noise, 4).unwrap();
        assert!(fit.coefficients.iter().all(|a| a.abs() < 0.1));
    }

    #[test]
    fn ar_degenerate_windows() {
        let fit = ar_coefficients(&[2.5; 40], 4).unwrap();
        assert!(fit.degenerate);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-6);
        assert!(fit.coefficients[1..].iter().all(|a| a.abs() < 1e-6));
        let fit = ar_coefficients(&[0.0; 40], 4).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.coefficients, [0.0; 4]);
        assert!(ar_coefficients(&[1.0; 12], 4).is_err());
    }

    #[test]
    fn spectral_examples() {
        let fs = 500.0;
        let x: Vec<f64> = (0..250).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let psd = psd_of(&x, fs);
        let alpha = subband_power(&psd, [8.0, 12.0]).unwrap();
        let beta = subband_power(&psd, [12.0, 30.0]).unwrap();
        assert!(alpha > 10.0 * beta);
        let (_, f) = peak_psd(&psd, 1.0).unwrap();
        assert!((f - 10.0).abs() <= psd.bin_width() / 2.0);

        let zero = psd_of(&[0.0; 50], fs);
        assert_eq!(subband_power(&zero, [8.0, 12.0]).unwrap(), 0.0);
        assert!(peak_psd(&psd_of(&[1.0; 50], fs), 1.0).is_ok_and(|(p, _)| p == 0.0));

        let flat = PsdEstimate { freqs_hz: (0..=250).map(f64::from).collect(), power: vec![0.7; 251] };
        assert!((subband_power(&flat, [8.0, 12.0]).unwrap() - 0.7 * 4.0).abs() < 1e-9);
        assert!((subband_power(&flat, [12.0, 30.0]).unwrap() - 0.7 * 18.0).abs() < 1e-9);
        assert!(subband_power(&flat, [12.0, 12.0]).is_err());
        assert!(subband_power(&flat, [240.0, 260.0]).is_err());
    }

    #[test]
    fn peak_ties_and_cutoff() {
        let psd = PsdEstimate { freqs_hz: vec![0.0, 1.0, 2.0, 3.0], power: vec![9.0, 1.0, 4.0, 4.0] };
        assert_eq!(peak_psd(&psd, 1.0).unwrap(), (4.0, 2.0));
        let dc_only = PsdEstimate { freqs_hz: vec![0.0], power: vec![1.0] };
        assert!(peak_psd(&dc_only, 1.0).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(spectral_energy(&[0.0; 8]), 0.0);
        assert!((spectral_energy(&[1.0, 0.0, 0.0, 0.0]) - 4.0).abs() < 1e-12);
        let (ca, cd) = dwt_features(&[3.0; 10]);
        assert!(ca > 0.0);
        assert_eq!(cd, 0.0);
        let (ca, cd) = dwt_features(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(ca, 0.0);
        assert!((cd - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scaling_and_reversal_properties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = 3.5;
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        assert!(rel(mav(&scaled), c * mav(&w)));
        assert!(rel(std_dev(&scaled), c * std_dev(&w)));
        assert!(rel(variance(&scaled), c * c * variance(&w)));
        assert!(rel(waveform_length(&scaled).unwrap(), c * waveform_length(&w).unwrap()));
        let thr = 1.0;
        assert!(willison_amplitude(&scaled, thr).unwrap() > willison_amplitude(&w, thr).unwrap());
        let shrunk: Vec<f64> = w.iter().map(|v| v / c).collect();
        assert!(willison_amplitude(&shrunk, thr).unwrap() < willison_amplitude(&w, thr).unwrap());

        let rev: Vec<f64> = w.iter().rev().copied().collect();
        assert!(rel(mav(&rev), mav(&w)));
        assert!(rel(std_dev(&rev), std_dev(&w)));
        assert!(rel(variance(&rev), variance(&w)));
        assert!(rel(waveform_length(&rev).unwrap(), waveform_length(&w).unwrap()));
        assert_eq!(willison_amplitude(&rev, 0.5).unwrap(), willison_amplitude(&w, 0.5).unwrap());
        assert!(rel(spectral_energy(&rev), spectral_energy(&w)));
        let (pa, pr) = (psd_of(&w, 500.0), psd_of(&rev, 500.0));
        assert!(rel(subband_power(&pr, [12.0, 30.0]).unwrap(), subband_power(&pa, [12.0, 30.0]).unwrap()));
    }

    fn eeg_recording(len: usize) -> (Recording, StageSegmentation) {
        let names: Vec<String> = Modality::Eeg.preset_channels().iter().map(|c| c.to_string()).collect();
        let samples = (0..7).map(|c| (0..len).map(|i| ((i * (c + 1)) as f64 * 0.05).sin()).collect()).collect();
        let rec = Recording::new(Modality::Eeg, names, 500.0, samples, 3).unwrap();
        (rec, StageSegmentation::new([len / 5, len * 9 / 20, len * 3 / 4], len).unwrap())
    }

    #[test]
    fn eeg_preset_shape() {
        let (rec, seg) = eeg_recording(5000);
        let m = extract_eeg_features(&rec, &seg, &EegFeatureConfig::default()).unwrap();
        assert_eq!(m.n_cols(), 70);
        assert_eq!(m.n_rows(), 496);
        assert_eq!(m.feature_names()[0], "C3_MAV");
        assert_eq!(m.feature_names()[69], "CP6_E_cD");
        assert!(m.trial_ids().iter().all(|&t| t == 3));

        let zero = Recording { samples: vec![vec![0.0; 5000]; 7], ..rec.clone() };
        let m = extract_eeg_features(&zero, &seg, &EegFeatureConfig::default()).unwrap();
        for f in ["MAV", "SD", "V", "SE", "ASB_alpha", "ASB_beta"] {
            let j = m.column_index(&format!("Cz_{f}")).unwrap();
            assert!(m.column(j).all(|v| v == 0.0), "{f}");
        }
    }

    #[test]
    fn missing_channel_is_named() {
        let (mut rec, seg) = eeg_recording(600);
        rec.channel_names[3] = "T7".into();
        let err = extract_eeg_features(&rec, &seg, &EegFeatureConfig::default()).unwrap_err();
        assert_eq!(err, Error::MissingChannel("CP1".into()));
    }

    #[test]
    fn emg_preset_shape_and_thresholds() {
        let names: Vec<String> = Modality::Emg.preset_channels().iter().map(|c| c.to_string()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let seg = StageSegmentation::new([8000, 18000, 30000], 40000).unwrap();
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                (0..40000)
                    .map(|i| {
                        let amp = if seg.stage_of(i) == Stage::Lifting { 1.0 } else { 0.05 };
                        amp * rng.random_range(-1.0..1.0)
                    })
                    .collect()
            })
            .collect();
        let rec = Recording::new(Modality::Emg, names, 4000.0, samples, 1).unwrap();
        let cfg = EmgFeatureConfig::default();
        let thr = willison_thresholds(&cfg, &[(&rec, &seg)]).unwrap();
        assert!(thr.iter().all(|&t| (t - 0.05 / 3f64.sqrt()).abs() < 0.005));
        let m = extract_emg_features(&rec, &seg, &cfg, &thr).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (197, 25));
        let j = m.column_index("Brachioradialis_MAV").unwrap();
        let mean_mav = |stage: usize| {
            let v: Vec<f64> = (0..m.n_rows()).filter(|&i| m.labels()[i] == stage).map(|i| m.row(i)[j]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean_mav(0) < mean_mav(2));

        let fixed = EmgFeatureConfig { willison_threshold: Some(0.2), ..cfg.clone() };
        assert_eq!(willison_thresholds(&fixed, &[]).unwrap(), vec![0.2; 5]);
        assert!(extract_emg_features(&rec, &seg, &cfg, &thr[..3]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn scaling_and_reversal(w in proptest::collection::vec(-5.0f64..5.0, 8..200), c in 0.01f64..100.0) {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            proptest::prop_assert!(close(mav(&scaled), c * mav(&w)));
            proptest::prop_assert!(close(std_dev(&scaled), c * std_dev(&w)));
            proptest::prop_assert!(close(variance(&scaled), c * c * variance(&w)));
            proptest::prop_assert!(close(waveform_length(&scaled).unwrap(), c * waveform_length(&w).unwrap()));

            let rev: Vec<f64> = w.iter().rev().copied().collect();
            proptest::prop_assert!(close(mav(&rev), mav(&w)));
            proptest::prop_assert!(close(variance(&rev), variance(&w)));
            proptest::prop_assert!(close(waveform_length(&rev).unwrap(), waveform_length(&w).unwrap()));
            proptest::prop_assert_eq!(willison_amplitude(&rev, 1.0).unwrap(), willison_amplitude(&w, 1.0).unwrap());
            proptest::prop_assert!(close(spectral_energy(&rev), spectral_energy(&w)));
            let (pa, pr) = (psd_of(&w, 500.0), psd_of(&rev, 500.0));
            let (ba, br) = (subband_power(&pa, [12.0, 30.0]).unwrap(), subband_power(&pr, [12.0, 30.0]).unwrap());
            proptest::prop_assert!((ba - br).abs() <= 1e-9 * pa.power.iter().fold(1e-12f64, |m, &p| m.max(p)) * 18.0);
        }
    }
}

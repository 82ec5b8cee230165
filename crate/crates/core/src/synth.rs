//! Deterministic synthetic four-stage EEG/EMG trials and Gaussian noise
//! injection.
//!
//! EEG channels carry 8–12 Hz and 12–30 Hz band-limited noise whose
//! amplitudes switch with the stage on top of a weak broadband background.
//! Each EEG channel only tells some stages apart, so the full montage is
//! needed to separate all four. EMG channels are band-limited bursts gated by
//! a per-muscle, per-stage activation level.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::BandpassDesign;
use crate::error::bail;
use crate::fusion::NoisinessBaseline;
use crate::prelude::*;
use crate::rng::{stream_rng, tag};
use crate::signal::{Modality, Recording, StageSegmentation, Trial};
use crate::Result;

const H: f64 = 1.0;
const L: f64 = 0.65;
const M: f64 = 0.825;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub trial_count: usize,
    pub trial_length_s: f64,
    /// Nominal stage boundaries in seconds.
    pub boundaries_s: [f64; 3],
    /// Each boundary moves by a uniform offset in `±boundary_jitter_s` per trial.
    pub boundary_jitter_s: f64,
    /// Width of the linear amplitude ramp centred on each boundary.
    pub transition_s: f64,
    pub eeg_rate_hz: f64,
    pub emg_rate_hz: f64,
    pub eeg_channels: Vec<String>,
    pub emg_channels: Vec<String>,
    /// Per-channel alpha-band amplitude (standard deviation) for each stage.
    pub eeg_alpha: Vec<[f64; 4]>,
    /// Per-channel beta-band amplitude for each stage.
    pub eeg_beta: Vec<[f64; 4]>,
    /// Standard deviation of the white EEG background.
    pub eeg_background: f64,
    /// Per-muscle burst amplitude for each stage.
    pub emg_bursts: Vec<[f64; 4]>,
    /// Standard deviation of the white EMG sensor floor.
    pub emg_floor: f64,
    /// Log-normal spread of every stage amplitude across trials; larger
    /// values make the stages harder to tell apart.
    pub class_sigma: f64,
    /// Not serialised; set by the caller.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let strings = |m: Modality| m.preset_channels().iter().map(|c| c.to_string()).collect();
        GeneratorConfig {
            trial_count: 40,
            trial_length_s: 10.0,
            boundaries_s: [2.0, 4.5, 7.5],
            boundary_jitter_s: 0.25,
            transition_s: 0.1,
            eeg_rate_hz: 500.0,
            emg_rate_hz: 4000.0,
            eeg_channels: strings(Modality::Eeg),
            emg_channels: strings(Modality::Emg),
            eeg_alpha: vec![
                [H, H, L, L],
                [H, L, H, L],
                [H, L, L, H],
                [M, M, M, M],
                [L, H, L, H],
                [H, L, L, H],
                [M, M, M, M],
            ],
            eeg_beta: vec![
                [L, L, H, H],
                [M, M, M, M],
                [H, L, L, H],
                [H, H, L, L],
                [H, L, H, L],
                [M, M, M, M],
                [L, H, L, H],
            ],
            eeg_background: 0.3,
            emg_bursts: vec![
                [0.03, 1.00, 0.60, 0.30],
                [0.03, 0.30, 1.00, 0.55],
                [0.03, 0.20, 0.90, 0.25],
                [0.03, 0.80, 0.35, 0.70],
                [0.03, 0.45, 1.00, 0.20],
            ],
            emg_floor: 0.01,
            class_sigma: 0.1,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let [b1, b2, b3] = self.boundaries_s;
        let j = self.boundary_jitter_s;
        if !(j >= 0.0 && b1 - j > 0.0 && b1 + j < b2 - j && b2 + j < b3 - j && b3 + j < self.trial_length_s) {
            bail!(Config, "stage boundaries {:?} (jitter {j}) must increase strictly inside the {} s trial", self.boundaries_s, self.trial_length_s);
        }
        if self.trial_count == 0 || !(self.eeg_rate_hz > 0.0 && self.emg_rate_hz > 0.0) {
            bail!(Config, "trial count and sampling rates must be positive");
        }
        if self.eeg_alpha.len() != self.eeg_channels.len() || self.eeg_beta.len() != self.eeg_channels.len() {
            bail!(Config, "need one alpha and one beta profile per EEG channel");
        }
        if self.emg_bursts.len() != self.emg_channels.len() {
            bail!(Config, "need one burst profile per EMG channel");
        }
        let amps = self.eeg_alpha.iter().chain(&self.eeg_beta).chain(&self.emg_bursts).flatten();
        let scalars = [self.eeg_background, self.emg_floor, self.class_sigma, self.transition_s];
        if amps.chain(&scalars).any(|a| !(*a >= 0.0) || !a.is_finite()) {
            bail!(Config, "amplitudes, spreads and ramp widths must be finite and non-negative");
        }
        if 30.0 >= self.eeg_rate_hz / 2.0 || 450.0 >= self.emg_rate_hz / 2.0 {
            bail!(Config, "sampling rates are too low for the EEG beta band or the EMG burst band");
        }
        Ok(())
    }
}

fn white(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Band-limited noise scaled to unit standard deviation.
fn band_noise(rng: &mut impl Rng, n: usize, band: [f64; 2], fs: f64) -> Result<Vec<f64>> {
    let design = BandpassDesign::new(band[0], band[1], 4, fs)?;
    // a second of lead-in lets the filter settle before the kept samples
    let lead = fs as usize;
    let mut y = design.filter(&white(rng, n + lead)).split_off(lead);
    let sd = (y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if sd > 0.0 {
        y.iter_mut().for_each(|v| *v /= sd);
    }
    Ok(y)
}

/// Piecewise-constant stage levels with linear ramps around each boundary.
fn envelope(levels: [f64; 4], boundaries: [usize; 3], ramp: usize, n: usize) -> Vec<f64> {
    let half = ramp as f64 / 2.0;
    (0..n)
        .map(|i| {
            let mut v = levels[0];
            for (k, &b) in boundaries.iter().enumerate() {
                let t = ((i as f64 - b as f64 + half) / ramp.max(1) as f64).clamp(0.0, 1.0);
                v += t * (levels[k + 1] - levels[k]);
            }
            v
        })
        .collect()
}

fn jittered(levels: &[f64; 4], sigma: f64, rng: &mut impl Rng) -> [f64; 4] {
    levels.map(|a| {
        let z: f64 = StandardNormal.sample(rng);
        a * (sigma * z).exp()
    })
}

/// Generates `cfg.trial_count` paired EEG/EMG trials with ids `1..=trial_count`.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Vec<Trial>> {
    cfg.validate()?;
    (1..=cfg.trial_count as u32).map(|id| generate_trial(cfg, id)).collect()
}

/// One trial; the same `(cfg.seed, id)` always yields the same samples.
pub fn generate_trial(cfg: &GeneratorConfig, id: u32) -> Result<Trial> {
    let id64 = u64::from(id);
    let mut timing = stream_rng(cfg.seed, &[tag::SYNTH, id64, 0]);
    let bounds_s = cfg.boundaries_s.map(|b| b + cfg.boundary_jitter_s * timing.random_range(-1.0..=1.0));
    let to_samples = |fs: f64| {
        let n = (cfg.trial_length_s * fs).round() as usize;
        let b = bounds_s.map(|t| (t * fs).round() as usize);
        (n, b, (cfg.transition_s * fs).round() as usize)
    };

    let (n, b, ramp) = to_samples(cfg.eeg_rate_hz);
    let eeg_stages = StageSegmentation::new(b, n)?;
    let mut eeg = Vec::with_capacity(cfg.eeg_channels.len());
    for c in 0..cfg.eeg_channels.len() {
        let mut rng = stream_rng(cfg.seed, &[tag::SYNTH, id64, 1, c as u64]);
        let alpha_env = envelope(jittered(&cfg.eeg_alpha[c], cfg.class_sigma, &mut rng), b, ramp, n);
        let beta_env = envelope(jittered(&cfg.eeg_beta[c], cfg.class_sigma, &mut rng), b, ramp, n);
        let alpha = band_noise(&mut rng, n, [8.0, 12.0], cfg.eeg_rate_hz)?;
        let beta = band_noise(&mut rng, n, [12.0, 30.0], cfg.eeg_rate_hz)?;
        let bg = white(&mut rng, n);
        eeg.push((0..n).map(|i| alpha_env[i] * alpha[i] + beta_env[i] * beta[i] + cfg.eeg_background * bg[i]).collect());
    }

    let (n, b, ramp) = to_samples(cfg.emg_rate_hz);
    let emg_stages = StageSegmentation::new(b, n)?;
    let mut emg = Vec::with_capacity(cfg.emg_channels.len());
    for c in 0..cfg.emg_channels.len() {
        let mut rng = stream_rng(cfg.seed, &[tag::SYNTH, id64, 2, c as u64]);
        let env = envelope(jittered(&cfg.emg_bursts[c], cfg.class_sigma, &mut rng), b, ramp, n);
        let burst = band_noise(&mut rng, n, [20.0, 450.0], cfg.emg_rate_hz)?;
        let floor = white(&mut rng, n);
        emg.push((0..n).map(|i| env[i] * burst[i] + cfg.emg_floor * floor[i]).collect());
    }

    Ok(Trial {
        id,
        eeg: Recording::new(Modality::Eeg, cfg.eeg_channels.clone(), cfg.eeg_rate_hz, eeg, id)?,
        emg: Recording::new(Modality::Emg, cfg.emg_channels.clone(), cfg.emg_rate_hz, emg, id)?,
        eeg_stages,
        emg_stages,
    })
}

/// Adds i.i.d. Gaussian noise with standard deviation
/// `alpha × baseline.fluctuation` to every sample.
///
/// The draw depends only on `(seed, modality, trial id, channel)`.
pub fn add_gaussian_noise(rec: &Recording, alpha: f64, baseline: &NoisinessBaseline, seed: u64) -> Result<Recording> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        bail!(Config, "noise alpha must be finite and non-negative, got {alpha}");
    }
    if rec.modality != baseline.modality {
        bail!(Input, "trial {} is {} but the baseline is for {}", rec.trial_id, rec.modality, baseline.modality);
    }
    let sigma = alpha * baseline.fluctuation;
    let mut out = rec.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let m = match rec.modality {
        Modality::Eeg => 0,
        Modality::Emg => 1,
    };
    for (c, ch) in out.samples.iter_mut().enumerate() {
        let mut rng = stream_rng(seed, &[tag::NOISE, m, u64::from(rec.trial_id), c as u64]);
        for v in ch.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    Ok(out)
}

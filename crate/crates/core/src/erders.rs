//! Event-related desynchronisation/synchronisation (ERD/ERS) band-power
//! curves and the channel-reduction experiment.

use serde::{Deserialize, Serialize};

use crate::classify::{cross_validate, CvConfig, CvReport, ModelSpec};
use crate::dsp::{savgol_smooth, BandpassDesign};
use crate::error::bail;
use crate::features::{EegFeatureConfig, FeatureExtractor};
use crate::prelude::*;
use crate::signal::{Recording, Trial};
use crate::Error;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErdErsConfig {
    pub band: [f64; 2],
    /// Reference interval in seconds from trial start.
    pub baseline_s: [f64; 2],
    pub filter_order: usize,
    /// Savitzky-Golay window length in seconds, rounded to an odd sample count.
    pub smooth_window_s: f64,
    pub smooth_order: usize,
    /// Seconds dropped from both ends of the reported curve.
    pub edge_trim_s: f64,
}

impl Default for ErdErsConfig {
    fn default() -> Self {
        ErdErsConfig {
            band: [12.0, 30.0],
            baseline_s: [1.0, 2.0],
            filter_order: 5,
            smooth_window_s: 0.5,
            smooth_order: 3,
            edge_trim_s: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErdErsCurve {
    pub channel: String,
    pub band: [f64; 2],
    pub times_s: Vec<f64>,
    /// Band power relative to the baseline mean, in percent.
    pub percent_change: Vec<f64>,
    pub trial_count: usize,
}

impl ErdErsCurve {
    /// Mean of the curve over `[from_s, to_s)`.
    pub fn mean_between(&self, from_s: f64, to_s: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .times_s
            .iter()
            .zip(&self.percent_change)
            .filter(|(t, _)| **t >= from_s && **t < to_s)
            .map(|(_, v)| *v)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Band-pass, square, average over trials, smooth, then express as percent
/// change from the baseline interval.
///
/// Trials are cropped to the shortest one first.
pub fn erd_ers_curve(trials: &[&Recording], channel: &str, cfg: &ErdErsConfig) -> Result<ErdErsCurve> {
    if trials.len() < 2 {
        bail!(Input, "ERD/ERS averaging needs at least two trials, got {}", trials.len());
    }
    let fs = trials[0].sampling_rate_hz;
    if trials.iter().any(|t| t.sampling_rate_hz != fs) {
        bail!(Input, "trials have different sampling rates");
    }
    let len = trials.iter().map(|t| t.len()).min().unwrap_or(0);
    let [b0, b1] = cfg.baseline_s.map(|s| (s * fs).round() as isize);
    if !(b0 >= 0 && b0 < b1 && b1 as usize <= len) {
        bail!(Input, "baseline {:?} s lies outside the {:.3} s common trial length", cfg.baseline_s, len as f64 / fs);
    }
    let design = BandpassDesign::new(cfg.band[0], cfg.band[1], cfg.filter_order, fs)?;
    let mut power = vec![0.0; len];
    for rec in trials {
        let x = &rec.channel(channel)?[..len];
        for (p, y) in power.iter_mut().zip(design.filtfilt(x)?) {
            *p += y * y;
        }
    }
    power.iter_mut().for_each(|p| *p /= trials.len() as f64);
    let mut window = ((cfg.smooth_window_s * fs).round() as usize).max(1);
    if window % 2 == 0 {
        window += 1;
    }
    let smooth = savgol_smooth(&power, window, cfg.smooth_order)?;
    let (b0, b1) = (b0 as usize, b1 as usize);
    let reference = smooth[b0..b1].iter().sum::<f64>() / (b1 - b0) as f64;
    if !(reference > 0.0) {
        return Err(Error::Input(format!("channel `{channel}` has no {:?} Hz power during the baseline", cfg.band)));
    }
    let trim = (cfg.edge_trim_s * fs).round() as usize;
    if 2 * trim >= len {
        bail!(Config, "edge trim of {} s leaves nothing of a {:.3} s trial", cfg.edge_trim_s, len as f64 / fs);
    }
    Ok(ErdErsCurve {
        channel: channel.to_string(),
        band: cfg.band,
        times_s: (trim..len - trim).map(|i| i as f64 / fs).collect(),
        percent_change: smooth[trim..len - trim].iter().map(|p| (p - reference) / reference * 100.0).collect(),
        trial_count: trials.len(),
    })
}

/// Cross-validated EEG classification using only `channels`.
pub fn channel_reduction_eval(
    trials: &[Trial],
    channels: &[String],
    features: &EegFeatureConfig,
    spec: &ModelSpec,
    cv: &CvConfig,
) -> Result<CvReport> {
    if channels.is_empty() {
        bail!(Config, "channel subset is empty");
    }
    for t in trials {
        for ch in channels {
            t.eeg.channel_index(ch)?;
        }
    }
    let cfg = EegFeatureConfig { channels: channels.to_vec(), ..features.clone() };
    let m = FeatureExtractor::Eeg(cfg).extract_all(trials.iter().map(|t| (&t.eeg, &t.eeg_stages)))?;
    cross_validate(spec, &m, cv)
}

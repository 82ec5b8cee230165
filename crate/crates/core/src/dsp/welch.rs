use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use crate::error::bail;
use crate::prelude::*;
use crate::Result;

/// Taper applied to each segment before the transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    /// Symmetric Hann, so reversing a segment reverses its taper too.
    Hann,
    Rectangular,
}

impl WindowFn {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowFn::Hann if len > 1 => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect(),
            WindowFn::Hann => vec![1.0; len],
            WindowFn::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap: usize,
    pub window: WindowFn,
    /// Transform length; segments are zero-padded up to it. Defaults to the
    /// segment length.
    pub nfft: Option<usize>,
}

impl WelchConfig {
    /// Hann window with 50% overlap.
    pub fn new(segment_len: usize) -> Self {
        WelchConfig { segment_len, overlap: segment_len / 2, window: WindowFn::Hann, nfft: None }
    }

    pub fn with_nfft(mut self, nfft: usize) -> Self {
        self.nfft = Some(nfft);
        self
    }
}

/// One-sided power spectral density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// Power per Hz.
    pub power: Vec<f64>,
}

impl PsdEstimate {
    /// Spacing between neighbouring bins.
    pub fn bin_width(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(0.0) - self.freqs_hz[0]
    }
}

/// Segment length that holds two cycles of `lowest_freq_hz`, clipped to the
/// data length. Short analysis windows therefore fall back to a single
/// periodogram spanning the whole window.
pub fn default_segment_len(sampling_rate_hz: f64, lowest_freq_hz: f64, data_len: usize) -> usize {
    let two_cycles = (2.0 * sampling_rate_hz / lowest_freq_hz).ceil() as usize;
    two_cycles.min(data_len)
}

/// A Welch estimator prepared for one segment length.
///
/// Each segment has its mean removed before tapering; the removed mean power
/// is credited to the 0 Hz bin, so a constant offset only ever shows up there.
#[derive(Clone, Debug)]
pub struct Welch {
    fs: f64,
    segment_len: usize,
    step: usize,
    nfft: usize,
    taper: Vec<f64>,
    taper_power: f64,
    plan: FftPlan,
}

impl Welch {
    pub fn new(sampling_rate_hz: f64, cfg: &WelchConfig) -> Result<Self> {
        if cfg.segment_len < 4 {
            bail!(Config, "Welch segment length {} is below 4 samples", cfg.segment_len);
        }
        if cfg.overlap >= cfg.segment_len {
            bail!(Config, "Welch overlap {} must be below the segment length {}", cfg.overlap, cfg.segment_len);
        }
        if !(sampling_rate_hz > 0.0) {
            bail!(Config, "sampling rate must be positive, got {sampling_rate_hz}");
        }
        let nfft = cfg.nfft.unwrap_or(cfg.segment_len).max(cfg.segment_len);
        let taper = cfg.window.coefficients(cfg.segment_len);
        let taper_power = taper.iter().map(|w| w * w).sum();
        Ok(Welch {
            fs: sampling_rate_hz,
            segment_len: cfg.segment_len,
            step: cfg.segment_len - cfg.overlap,
            nfft,
            taper,
            taper_power,
            plan: FftPlan::new(nfft),
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..=self.nfft / 2).map(|k| k as f64 * self.fs / self.nfft as f64).collect()
    }

    /// Estimates the PSD of `x`, which must hold at least one segment.
    pub fn estimate(&self, x: &[f64]) -> Result<PsdEstimate> {
        if x.len() < self.segment_len {
            bail!(Input, "signal of {} samples is shorter than the segment length {}", x.len(), self.segment_len);
        }
        let bins = self.nfft / 2 + 1;
        let mut power = vec![0.0; bins];
        let mut dc = 0.0;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nfft];
        let segments = (x.len() - self.segment_len) / self.step + 1;
        for s in 0..segments {
            let seg = &x[s * self.step..s * self.step + self.segment_len];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            dc += mean * mean;
            for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&self.taper)) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            buf[self.segment_len..].fill(Complex64::new(0.0, 0.0));
            self.plan.forward(&mut buf);
            for (p, v) in power.iter_mut().zip(&buf) {
                *p += v.norm_sqr();
            }
        }
        let scale = 1.0 / (self.fs * self.taper_power * segments as f64);
        for (k, p) in power.iter_mut().enumerate() {
            let one_sided = if k == 0 || (self.nfft % 2 == 0 && k == self.nfft / 2) { 1.0 } else { 2.0 };
            *p *= scale * one_sided;
        }
        power[0] += dc / segments as f64 / (self.fs / self.nfft as f64);
        Ok(PsdEstimate { freqs_hz: self.freqs(), power })
    }
}

/// Welch power spectral density of `x`.
///
/// If `x` is shorter than the configured segment, a single periodogram over
/// all of `x` is returned instead (frequency resolution `fs / len(x)`).
pub fn welch_psd(x: &[f64], sampling_rate_hz: f64, cfg: &WelchConfig) -> Result<PsdEstimate> {
    if cfg.segment_len < 4 {
        bail!(Config, "Welch segment length {} is below 4 samples", cfg.segment_len);
    }
    let mut cfg = *cfg;
    if x.len() < cfg.segment_len {
        cfg.segment_len = x.len();
        cfg.overlap = 0;
    }
    Welch::new(sampling_rate_hz, &cfg)?.estimate(x)
}

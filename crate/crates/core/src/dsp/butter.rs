use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::bail;
use crate::prelude::*;
use crate::Result;

/// One second-order section, `a[0] == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// State that holds the section at rest for a constant unit input.
    fn steady_state(&self) -> [f64; 2] {
        let h = self.dc_gain();
        [h - self.b[0], self.b[2] - self.a[2] * h]
    }
}

/// Digital Butterworth band-pass filter as cascaded second-order sections.
///
/// Designed from the analog prototype by low-pass to band-pass transformation
/// and the bilinear transform with the band edges prewarped. An order-`n`
/// design has `2n` poles and `n` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandpassDesign {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub sampling_rate_hz: f64,
    sections: Vec<Biquad>,
}

impl BandpassDesign {
    pub fn new(low_hz: f64, high_hz: f64, order: usize, sampling_rate_hz: f64) -> Result<Self> {
        let nyquist = sampling_rate_hz / 2.0;
        if !(0.0 < low_hz && low_hz < high_hz && high_hz < nyquist) {
            bail!(Config, "band edges must satisfy 0 < {low_hz} < {high_hz} < {nyquist}");
        }
        if order == 0 {
            bail!(Config, "filter order must be at least 1");
        }
        let fs2 = 2.0 * sampling_rate_hz;
        let w1 = fs2 * (PI * low_hz / sampling_rate_hz).tan();
        let w2 = fs2 * (PI * high_hz / sampling_rate_hz).tan();
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let to_z = |s: Complex64| (fs2 + s) / (fs2 - s);
        let lp_to_bp = |p: Complex64| {
            let half = p * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            (half + root, half - root)
        };
        let conj_pair = |z: Complex64| Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * z.re, z.norm_sqr()] };

        let mut sections = Vec::with_capacity(order);
        for k in 0..order {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let real_pole = order % 2 == 1 && k == (order - 1) / 2;
            if real_pole {
                let (s1, s2) = lp_to_bp(Complex64::new(-1.0, 0.0));
                let (z1, z2) = (to_z(s1), to_z(s2));
                if z1.im.abs() > 1e-12 {
                    sections.push(conj_pair(z1));
                } else {
                    sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -(z1.re + z2.re), z1.re * z2.re] });
                }
            } else if theta.sin() > 0.0 {
                let (s1, s2) = lp_to_bp(Complex64::from_polar(1.0, theta));
                sections.push(conj_pair(to_z(s1)));
                sections.push(conj_pair(to_z(s2)));
            }
        }

        let centre = 2.0 * (w0_sq.sqrt() / fs2).atan();
        let z_inv = Complex64::from_polar(1.0, -centre);
        let mag: f64 = sections.iter().map(|s| s.response(z_inv).norm()).product();
        let per_section = mag.powf(-1.0 / sections.len() as f64);
        for s in &mut sections {
            s.b.iter_mut().for_each(|b| *b *= per_section);
        }
        Ok(BandpassDesign { low_hz, high_hz, order, sampling_rate_hz, sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sampling_rate_hz);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Samples of reflected padding added at each end by [`Self::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, None);
        y
    }

    /// Forward-backward (zero-phase) filtering with odd reflection of
    /// [`Self::pad_len`] samples at each end and steady-state initial
    /// conditions. The magnitude response is squared.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        if x.len() <= pad {
            bail!(Input, "zero-phase filtering needs more than {pad} samples, got {}", x.len());
        }
        let n = x.len();
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let x0 = ext[0];
        self.run(&mut ext, Some(x0));
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, Some(y0));
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    fn run(&self, y: &mut [f64], initial: Option<f64>) {
        let mut level = initial.unwrap_or(0.0);
        for s in &self.sections {
            let [mut z0, mut z1] = s.steady_state().map(|v| v * level);
            for v in y.iter_mut() {
                let x = *v;
                let out = s.b[0] * x + z0;
                z0 = s.b[1] * x - s.a[1] * out + z1;
                z1 = s.b[2] * x - s.a[2] * out;
                *v = out;
            }
            level *= s.dc_gain();
        }
    }
}

/// Band-pass filters `x`, optionally forward-backward for zero phase.
pub fn butterworth_bandpass(x: &[f64], design: &BandpassDesign, zero_phase: bool) -> Result<Vec<f64>> {
    if x.len() <= 3 * design.order {
        bail!(Input, "signal of {} samples is too short for an order-{} filter", x.len(), design.order);
    }
    if zero_phase {
        design.filtfilt(x)
    } else {
        Ok(design.filter(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn alpha() -> BandpassDesign {
        BandpassDesign::new(8.0, 12.0, 5, 500.0).unwrap()
    }

    #[test]
    fn has_order_sections_and_is_stable() {
        let d = alpha();
        assert_eq!(d.sections().len(), 5);
        for s in d.sections() {
            // both roots of z^2 + a1 z + a2 inside the unit circle
            assert!(s.a[2].abs() < 1.0 && s.a[1].abs() < 1.0 + s.a[2]);
        }
    }

    #[test]
    fn passband_and_stopband_levels() {
        let d = alpha();
        let x = sine(10.0, 500.0, 5000);
        let y = butterworth_bandpass(&x, &d, true).unwrap();
        let ratio = rms(&y[1000..4000]) / rms(&x[1000..4000]);
        assert!((20.0 * ratio.log10()).abs() < 0.5, "passband gain {ratio}");

        let x = sine(50.0, 500.0, 5000);
        let y = butterworth_bandpass(&x, &d, true).unwrap();
        assert!(rms(&y[1000..4000]) <= rms(&x[1000..4000]) * 10f64.powf(-30.0 / 20.0));
    }

    #[test]
    fn edges_sit_at_minus_three_db() {
        let d = alpha();
        for f in [8.0, 12.0] {
            let g = d.response(f).norm();
            assert!((g - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{f} Hz: {g}");
        }
        assert!(d.response(0.0).norm() < 1e-12);
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let d = BandpassDesign::new(12.0, 30.0, 5, 500.0).unwrap();
        let x = sine(20.0, 500.0, 4000);
        let y = d.filtfilt(&x).unwrap();
        let xcorr = |lag: isize| -> f64 {
            (1000..3000).map(|i| y[i] * x[(i as isize + lag) as usize]).sum()
        };
        let best = (-10..=10).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn twice_filtered_matches_fourth_power_response() {
        let d = BandpassDesign::new(12.0, 30.0, 5, 500.0).unwrap();
        for f in [14.0, 20.0, 33.0] {
            let x = sine(f, 500.0, 6000);
            let twice = d.filtfilt(&d.filtfilt(&x).unwrap()).unwrap();
            let gain = d.response(f).norm().powi(4);
            let diff: Vec<f64> = (2000..4000).map(|i| twice[i] - gain * x[i]).collect();
            assert!(rms(&diff) < 1e-6, "{f} Hz: {}", rms(&diff));
        }
    }

    #[test]
    fn zero_in_zero_out_and_validation() {
        let d = alpha();
        assert!(butterworth_bandpass(&[0.0; 100], &d, true).unwrap().iter().all(|&v| v == 0.0));
        assert!(butterworth_bandpass(&[0.0; 15], &d, true).is_err());
        assert!(BandpassDesign::new(12.0, 8.0, 5, 500.0).is_err());
        assert!(BandpassDesign::new(8.0, 260.0, 5, 500.0).is_err());
        assert!(BandpassDesign::new(8.0, 12.0, 0, 500.0).is_err());
    }

    #[test]
    fn even_and_wideband_orders() {
        for (lo, hi, n) in [(1.0, 200.0, 4), (20.0, 450.0, 3), (8.0, 12.0, 1)] {
            let fs = if hi > 250.0 { 4000.0 } else { 500.0 };
            let d = BandpassDesign::new(lo, hi, n, fs).unwrap();
            assert_eq!(d.sections().len(), n);
            let centre = (lo * hi).sqrt();
            assert!((d.response(centre).norm() - 1.0).abs() < 0.05);
        }
    }
}

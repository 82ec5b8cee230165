//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report lines are always shown.
//! Numeric arguments pick criteria; any other filter argument that does not
//! occur in "acceptance" skips the suite.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use biofuse_core::classify::{
    Classifier, CvConfig, Knn, KnnConfig, Lstm, Mlp, ModelSpec, Samples,
};
use biofuse_core::dsp::{dft, simpson_integrate, welch_psd, Complex64, PsdEstimate, WelchConfig, WindowFn};
use biofuse_core::erders::{channel_reduction_eval, erd_ers_curve, ErdErsConfig};
use biofuse_core::features::{
    ar_coefficients, dwt_features, mav, mav_slope, peak_psd, spectral_energy, std_dev, subband_power, variance,
    waveform_length, willison_amplitude, EegFeatureConfig,
};
use biofuse_core::fusion::{
    fuse, fusion_weights, noisiness, noisiness_baseline, run_fusion_scenarios, NoiseCase, ScenarioConfig,
    SourceDecision,
};
use biofuse_core::selection::{boruta_select, BorutaConfig, FeatureStatus};
use biofuse_core::synth::{add_gaussian_noise, generate_dataset, generate_trial, GeneratorConfig};
use biofuse_core::{FeatureMatrix, Modality, Recording};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Largest deviation relative to the largest oracle magnitude.
fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if d == 0.0 {
        0.0
    } else {
        d / scale
    }
}

// ---------------------------------------------------------------- oracles

fn naive_dft(x: &[f64], n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re, im)
        })
        .collect()
}

fn oracle_mav(w: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in w {
        s += v.abs();
    }
    s / w.len() as f64
}

fn oracle_var(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mut mean = 0.0;
    for v in w {
        mean += v;
    }
    mean /= n;
    let mut ss = 0.0;
    for v in w {
        ss += (v - mean) * (v - mean);
    }
    ss / n
}

fn oracle_wl(w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..w.len() {
        s += (w[i] - w[i - 1]).abs();
    }
    s
}

fn oracle_wa(w: &[f64], thr: f64) -> usize {
    let mut c = 0;
    for i in 1..w.len() {
        if (w[i] - w[i - 1]).abs() >= thr {
            c += 1;
        }
    }
    c
}

/// Least squares through Householder QR of the lagged design matrix.
fn oracle_ar(w: &[f64], p: usize) -> Vec<f64> {
    let rows = w.len() - p;
    let mut a: Vec<Vec<f64>> = (0..rows).map(|r| (0..p).map(|j| w[r + p - 1 - j]).collect()).collect();
    let mut y: Vec<f64> = (0..rows).map(|r| w[r + p]).collect();
    for j in 0..p {
        let norm = (j..rows).map(|r| a[r][j] * a[r][j]).sum::<f64>().sqrt();
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|r| a[r][j]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for c in j..p {
            let dot: f64 = (j..rows).map(|r| v[r - j] * a[r][c]).sum();
            for r in j..rows {
                a[r][c] -= 2.0 * dot / vv * v[r - j];
            }
        }
        let dot: f64 = (j..rows).map(|r| v[r - j] * y[r]).sum();
        for r in j..rows {
            y[r] -= 2.0 * dot / vv * v[r - j];
        }
    }
    let mut x = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = (j + 1..p).map(|c| a[j][c] * x[c]).sum();
        x[j] = (y[j] - s) / a[j][j];
    }
    x
}

/// Averaged, Hann-tapered periodograms of mean-removed segments, with each
/// segment's mean power credited to the 0 Hz bin.
fn oracle_welch(x: &[f64], fs: f64, seg: usize, overlap: usize, nfft: usize) -> Vec<f64> {
    let taper: Vec<f64> = (0..seg)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (seg - 1) as f64).cos())
        .collect();
    let u: f64 = taper.iter().map(|t| t * t).sum();
    let step = seg - overlap;
    let count = (x.len() - seg) / step + 1;
    let bins = nfft / 2 + 1;
    let mut p = vec![0.0; bins];
    let mut dc = 0.0;
    for s in 0..count {
        let part = &x[s * step..s * step + seg];
        let mean = part.iter().sum::<f64>() / seg as f64;
        dc += mean * mean;
        let tapered: Vec<f64> = part.iter().zip(&taper).map(|(v, t)| (v - mean) * t).collect();
        for (k, (re, im)) in naive_dft(&tapered, nfft).into_iter().take(bins).enumerate() {
            p[k] += re * re + im * im;
        }
    }
    for (k, v) in p.iter_mut().enumerate() {
        let one_sided = if k == 0 || (nfft % 2 == 0 && k == nfft / 2) { 1.0 } else { 2.0 };
        *v *= one_sided / (fs * u * count as f64);
    }
    p[0] += dc / count as f64 * nfft as f64 / fs;
    p
}

/// Uniform-grid composite Simpson, trapezoid on a leftover interval.
fn oracle_simpson(y: &[f64], h: f64) -> f64 {
    let intervals = y.len() - 1;
    let paired = intervals - intervals % 2;
    let mut s = 0.0;
    let mut i = 0;
    while i < paired {
        s += h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
        i += 2;
    }
    if paired < intervals {
        s += h / 2.0 * (y[paired] + y[paired + 1]);
    }
    s
}

fn oracle_peak(psd: &PsdEstimate, low_cut: f64) -> (f64, f64) {
    let mut best: Option<usize> = None;
    for k in 0..psd.power.len() {
        if psd.freqs_hz[k] >= low_cut && best.is_none_or(|b| psd.power[k] > psd.power[b]) {
            best = Some(k);
        }
    }
    let b = best.unwrap();
    (psd.power[b], psd.freqs_hz[b])
}

fn oracle_dwt(w: &[f64]) -> (f64, f64) {
    let mut x = w.to_vec();
    if x.len() % 2 == 1 {
        x.push(*x.last().unwrap());
    }
    let (mut ea, mut ed) = (0.0, 0.0);
    for pair in x.chunks(2) {
        let a = (pair[0] + pair[1]) / 2f64.sqrt();
        let d = (pair[0] - pair[1]) / 2f64.sqrt();
        ea += a * a;
        ed += d * d;
    }
    ((1.0 + ea).ln(), (1.0 + ed).ln())
}

// ---------------------------------------------------------------- criteria

fn random_window(r: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<f64> {
    let n = r.random_range(min..=max);
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let offset = r.random_range(-1.0..1.0) * scale;
    (0..n).map(|_| offset + scale * normal(r)).collect()
}

fn feature_oracles() -> Outcome {
    const WINDOWS: usize = 100;
    const TOL: f64 = 1e-9;
    let mut r = rng(1);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut track = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(slot) => slot.1 = slot.1.max(e),
        None => worst.push((name, e)),
    };
    for _ in 0..WINDOWS {
        let w = random_window(&mut r, 2, 400);
        track("MAV", rel(mav(&w), oracle_mav(&w)));
        track("V", rel(variance(&w), oracle_var(&w)));
        track("SD", rel(std_dev(&w), oracle_var(&w).sqrt()));
        track("WL", rel(waveform_length(&w).unwrap(), oracle_wl(&w)));
        let thr = oracle_wl(&w) / (w.len() - 1) as f64 * r.random_range(0.2..2.0);
        let wa = willison_amplitude(&w, thr).unwrap();
        track("WA", if wa == oracle_wa(&w, thr) { 0.0 } else { 1.0 });

        let k = r.random_range(2..30);
        let width = r.random_range(2..50);
        let signal = random_window(&mut r, k * width, k * width);
        let mavs: Vec<f64> = signal.chunks(width).map(oracle_mav).collect();
        let lib: Vec<f64> = signal.chunks(width).map(mav).collect();
        let diffs: Vec<f64> = mavs.windows(2).map(|p| p[1] - p[0]).collect();
        track("MAS", rel_vec(&mav_slope(&lib).unwrap(), &diffs));

        let p = r.random_range(1..=4);
        let aw = random_window(&mut r, 3 * p + 8, 400);
        track("AR", rel_vec(&ar_coefficients(&aw, p).unwrap().coefficients, &oracle_ar(&aw, p)));

        let fs = 500.0;
        let seg = r.random_range(16..=96);
        let nfft = seg + r.random_range(0..64);
        let x = random_window(&mut r, seg, 400);
        let cfg = WelchConfig { segment_len: seg, overlap: seg / 2, window: WindowFn::Hann, nfft: Some(nfft) };
        let psd = welch_psd(&x, fs, &cfg).unwrap();
        track("Welch", rel_vec(&psd.power, &oracle_welch(&x, fs, seg, seg / 2, nfft)));

        let lo = r.random_range(0.0..120.0);
        let hi = lo + r.random_range(40.0..120.0);
        let bins: Vec<usize> = (0..psd.freqs_hz.len()).filter(|&k| psd.freqs_hz[k] >= lo && psd.freqs_hz[k] <= hi).collect();
        let ys: Vec<f64> = bins.iter().map(|&k| psd.power[k]).collect();
        track("ASB", rel(subband_power(&psd, [lo, hi]).unwrap(), oracle_simpson(&ys, fs / nfft as f64)));

        let cut = r.random_range(0.0..60.0);
        let (pp, fp) = peak_psd(&psd, cut).unwrap();
        let (op, of) = oracle_peak(&psd, cut);
        track("PPSD/FPPSD", rel(pp, op).max(rel(fp, of)));

        let (re_im, n) = (naive_dft(&w, w.len()), w.len());
        let se: f64 = re_im.iter().map(|(a, b)| a * a + b * b).sum();
        track("SE", rel(spectral_energy(&w), se));
        let spectrum = dft(&w);
        let flat = |v: &[Complex64]| v.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<_>>();
        let oracle_flat: Vec<f64> = re_im.iter().flat_map(|&(a, b)| [a, b]).collect();
        track("DFT", rel_vec(&flat(&spectrum[..n]), &oracle_flat));

        let (ea, ed) = dwt_features(&w);
        let (oa, od) = oracle_dwt(&w);
        track("E_cA/E_cD", rel(ea, oa).max(rel(ed, od)));
    }
    let bad: Vec<String> = worst.iter().filter(|(_, e)| !(*e <= TOL)).map(|(n, e)| format!("{n} {e:.2e}")).collect();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    ensure!(bad.is_empty(), "above 1e-9: {}", bad.join(", "));
    Ok(format!("{} operations × {WINDOWS} windows, worst relative error {max:.1e}", worst.len()))
}

fn numeric_grad(params: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let eps = 1e-5;
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = loss(&p);
            p[i] = orig - eps;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

fn random_samples(r: &mut ChaCha8Rng, n: usize, steps: usize, features: usize, classes: usize) -> Samples {
    let data = (0..n * steps * features).map(|_| r.random_range(-1.5..1.5)).collect();
    let labels = (0..n).map(|i| i % classes).collect();
    Samples::new(steps, features, data, labels, (0..n as u32).collect()).unwrap()
}

fn grad_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8)).fold(0.0, f64::max)
}

fn gradient_checks() -> Outcome {
    let mut r = rng(2);
    let mut worst_mlp = 0.0f64;
    let mut worst_lstm = 0.0f64;
    for trial in 0..3u64 {
        let s = random_samples(&mut r, 6, 1, 5, 3);
        let idx: Vec<usize> = (0..s.len()).collect();
        let mut net = Mlp::new(5, &[7, 4], 3, 10 + trial).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p += r.random_range(-0.3..0.3));
        let (_, analytic) = net.loss_and_gradient(&s, &idx);
        let numeric = numeric_grad(net.params(), |p| {
            let mut n = net.clone();
            n.params_mut().copy_from_slice(p);
            n.loss(&s, &idx)
        });
        worst_mlp = worst_mlp.max(grad_error(&analytic, &numeric));

        let s = random_samples(&mut r, 5, 6, 3, 4);
        let idx: Vec<usize> = (0..s.len()).collect();
        let mut net = Lstm::new(3, 5, 4, 20 + trial).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p += r.random_range(-0.5..0.5));
        let (_, analytic) = net.loss_and_gradient(&s, &idx);
        let numeric = numeric_grad(net.params(), |p| {
            let mut n = net.clone();
            n.params_mut().copy_from_slice(p);
            n.loss(&s, &idx)
        });
        worst_lstm = worst_lstm.max(grad_error(&analytic, &numeric));
    }
    ensure!(worst_mlp < 1e-4 && worst_lstm < 1e-4, "max relative error MLP {worst_mlp:.2e}, LSTM {worst_lstm:.2e}");
    Ok(format!("max relative error MLP {worst_mlp:.1e}, LSTM {worst_lstm:.1e}"))
}

/// Neighbours ordered by (distance, index); a tied vote goes to the tied
/// class whose member appears first in that order.
fn oracle_knn(train: &[Vec<f64>], labels: &[usize], classes: usize, q: &[f64], k: usize) -> (Vec<usize>, usize) {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut s = 0.0;
            for j in 0..p.len() {
                s += (p[j] - q[j]) * (p[j] - q[j]);
            }
            (s, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nn: Vec<usize> = d[..k].iter().map(|x| x.1).collect();
    let mut votes = vec![0; classes];
    for &i in &nn {
        votes[labels[i]] += 1;
    }
    let top = *votes.iter().max().unwrap();
    let winner = nn.iter().map(|&i| labels[i]).find(|&c| votes[c] == top).unwrap();
    (nn, winner)
}

fn knn_oracle() -> Outcome {
    let mut r = rng(3);
    let (n, dim, classes) = (200, 20, 4);
    let mut checked = 0;
    for grid in [false, true] {
        let draw = |r: &mut ChaCha8Rng| if grid { r.random_range(0..3) as f64 } else { normal(r) };
        let train: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| draw(&mut r)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let queries: Vec<Vec<f64>> =
            (0..100).map(|_| (0..dim).map(|_| draw(&mut r)).collect()).chain(train.iter().cloned()).collect();
        let samples =
            Samples::new(1, dim, train.concat(), labels.clone(), (0..n as u32).collect()).map_err(|e| e.to_string())?;
        for k in [1, 3, 5] {
            let model = Knn::fit(&samples, classes, &KnnConfig { k }).map_err(|e| e.to_string())?;
            for q in &queries {
                let (nn, winner) = oracle_knn(&train, &labels, classes, q, k);
                ensure!(model.neighbours(q) == nn, "k={k}: neighbour lists differ");
                ensure!(model.predict(q) == winner, "k={k}: prediction {} vs oracle {winner}", model.predict(q));
                let proba = model.predict_proba(q);
                let mut freq = vec![0.0; classes];
                nn.iter().for_each(|&i| freq[labels[i]] += 1.0 / k as f64);
                ensure!(rel_vec(&proba, &freq) < 1e-8, "k={k}: probabilities are not neighbour frequencies");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} queries on 200×20 data (continuous and tie-heavy), k ∈ {{1,3,5}}: all identical"))
}

fn welch_simpson() -> Outcome {
    let fs = 500.0;
    let x: Vec<f64> = (0..2000).map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin()).collect();
    let psd = welch_psd(&x, fs, &WelchConfig::new(500)).map_err(|e| e.to_string())?;
    let res = psd.bin_width();
    let (_, f_peak) = peak_psd(&psd, 1.0).map_err(|e| e.to_string())?;
    ensure!((f_peak - 10.0).abs() <= res / 2.0, "peak at {f_peak} Hz (resolution {res})");

    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (a, b, c) = (r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let lo = r.random_range(-3.0..3.0);
        let hi = lo + r.random_range(0.1..5.0);
        let m = 2 * r.random_range(1..40);
        let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|t| a * t * t + b * t + c).collect();
        let anti = |t: f64| a * t * t * t / 3.0 + b * t * t / 2.0 + c * t;
        let exact = anti(hi) - anti(lo);
        let got = simpson_integrate(&ys, &xs).map_err(|e| e.to_string())?;
        worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
    }
    ensure!(worst < 1e-12, "Simpson error on quadratics {worst:.2e}");

    let h = 0.37;
    let flat = PsdEstimate { freqs_hz: (0..=500).map(|k| k as f64 * 0.5).collect(), power: vec![h; 501] };
    let mut flat_err = 0.0f64;
    for band in [[8.0, 12.0], [12.0, 30.0], [0.0, 250.0], [1.5, 99.5]] {
        let got = subband_power(&flat, band).map_err(|e| e.to_string())?;
        flat_err = flat_err.max(rel(got, h * (band[1] - band[0])));
    }
    ensure!(flat_err < 1e-9, "flat-PSD band power error {flat_err:.2e}");
    Ok(format!("10 Hz sine peaks at {f_peak} Hz (bin {res} Hz); Simpson error {worst:.1e}; flat band error {flat_err:.1e}"))
}

fn noisiness_properties() -> Outcome {
    let gen = GeneratorConfig { seed: 5, ..GeneratorConfig::default() };
    let trials: Vec<_> = (1..=4).map(|id| generate_trial(&gen, id).unwrap()).collect();
    let mut homog = 0.0f64;
    for m in [Modality::Eeg, Modality::Emg] {
        let rec = trials[0].recording(m);
        let dup = noisiness_baseline(m, [rec, rec]).map_err(|e| e.to_string())?;
        let n = noisiness(rec, &dup).map_err(|e| e.to_string())?;
        ensure!(n == 1.0, "{m}: duplicated-trial baseline gives N = {n}");

        let base = noisiness_baseline(m, trials[1..].iter().map(|t| t.recording(m))).map_err(|e| e.to_string())?;
        let n0 = noisiness(rec, &base).map_err(|e| e.to_string())?;
        let mut r = rng(6);
        for _ in 0..20 {
            let c = 10f64.powf(r.random_range(-2.0..2.0));
            let scaled = Recording {
                samples: rec.samples.iter().map(|ch| ch.iter().map(|v| c * v).collect()).collect(),
                ..rec.clone()
            };
            homog = homog.max(rel(noisiness(&scaled, &base).map_err(|e| e.to_string())?, c * n0));
        }
        for seed in 0..20u64 {
            let mut prev = -1.0;
            for alpha in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0] {
                let noisy = add_gaussian_noise(rec, alpha, &base, seed).map_err(|e| e.to_string())?;
                let n = noisiness(&noisy, &base).map_err(|e| e.to_string())?;
                ensure!(n > prev, "{m}, seed {seed}: N fell to {n} at alpha {alpha}");
                prev = n;
            }
        }
    }
    ensure!(homog < 1e-12, "homogeneity error {homog:.2e}");
    Ok(format!("N = 1 exactly on duplicated baselines; homogeneity error {homog:.1e}; monotone in noise for 20 seeds × 2 modalities"))
}

fn fusion_arithmetic() -> Outcome {
    let w = fusion_weights(0.827, 0.998).map_err(|e| e.to_string())?;
    ensure!((w.eeg - 0.45315).abs() < 1e-5 && (w.emg - 0.54685).abs() < 1e-5, "weights {:?}", w);
    let mut r = rng(7);
    for _ in 0..1000 {
        let (a, b) = (r.random_range(1e-3..=1.0), r.random_range(1e-3..=1.0));
        let w = fusion_weights(a, b).map_err(|e| e.to_string())?;
        ensure!((w.eeg + w.emg - 1.0).abs() < 1e-12, "weights of ({a}, {b}) sum to {}", w.eeg + w.emg);
        ensure!(w.eeg > 0.0 && w.emg > 0.0 && rel(w.eeg / w.emg, a / b) < 1e-12, "weights of ({a}, {b}) lose the ratio");
    }
    let mut handoffs = 0;
    for _ in 0..1000 {
        let w = fusion_weights(r.random_range(0.05..1.0), r.random_range(0.05..1.0)).unwrap();
        let proba = |r: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let (pe, pm) = (proba(&mut r), proba(&mut r));
        let fixed = r.random_range(0.05..5.0);
        let mut grid: Vec<f64> = (0..24).map(|_| r.random_range(0.0..10.0)).collect();
        grid.push(0.0);
        grid.sort_by(f64::total_cmp);
        for noisy_eeg in [true, false] {
            let mut handed = false;
            for &n in &grid {
                let (ne, nm) = if noisy_eeg { (n, fixed) } else { (fixed, n) };
                let d = fuse(
                    &SourceDecision { modality: Modality::Eeg, proba: pe.clone(), noisiness: ne },
                    &SourceDecision { modality: Modality::Emg, proba: pm.clone(), noisiness: nm },
                    &w,
                )
                .map_err(|e| e.to_string())?;
                let noisy = if noisy_eeg { Modality::Eeg } else { Modality::Emg };
                let expected = if d.chosen == Modality::Eeg { &pe } else { &pm };
                ensure!(d.label == biofuse_core::classify::argmax(expected), "fused label is not the chosen argmax");
                if d.chosen != noisy {
                    handed = true;
                } else {
                    ensure!(!handed, "control returned to the noisier source as its noise grew");
                }
            }
            handoffs += usize::from(handed);
        }
    }
    Ok(format!("weights ({:.5}, {:.5}); 1000 normalisation checks; 1000 configurations monotone ({handoffs} handoffs)", w.eeg, w.emg))
}

fn fusion_scenario() -> Outcome {
    let t0 = Instant::now();
    let trials = generate_dataset(&GeneratorConfig::default()).map_err(|e| e.to_string())?;
    let report = run_fusion_scenarios(&trials, &ScenarioConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let row = |c| report.row(c).ok_or_else(|| format!("missing case {c:?}"));
    let (clean, eeg_noise, emg_noise, both) =
        (row(NoiseCase::Clean)?, row(NoiseCase::EegNoise)?, row(NoiseCase::EmgNoise)?, row(NoiseCase::Both)?);
    let summary = format!(
        "CV eeg {:.3} emg {:.3}; eeg-noise: eeg {:.3}→{:.3}, fused {:.3}; emg-noise fused {:.3} (eeg {:.3}, emg {:.3}); both fused {:.3} (eeg {:.3}, emg {:.3}); {:.0} s",
        report.cv_accuracy_eeg,
        report.cv_accuracy_emg,
        clean.acc_eeg,
        eeg_noise.acc_eeg,
        eeg_noise.acc_fused,
        emg_noise.acc_fused,
        emg_noise.acc_eeg,
        emg_noise.acc_emg,
        both.acc_fused,
        both.acc_eeg,
        both.acc_emg,
        elapsed.as_secs_f64()
    );
    ensure!(report.cv_accuracy_emg >= 0.95, "clean EMG below 0.95: {summary}");
    ensure!((0.70..=0.90).contains(&report.cv_accuracy_eeg), "clean EEG outside [0.70, 0.90]: {summary}");
    ensure!(clean.acc_eeg - eeg_noise.acc_eeg >= 0.15, "EEG drop under noise below 15 points: {summary}");
    ensure!((eeg_noise.acc_fused - clean.acc_emg).abs() <= 0.02, "fused not within 2 points of clean EMG: {summary}");
    for r in [emg_noise, both] {
        ensure!(r.acc_fused >= r.acc_eeg.max(r.acc_emg) - 0.02, "{}: fused below best source: {summary}", r.case.as_str());
    }
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}: {summary}");
    Ok(summary)
}

/// Planted feature is the stage label plus N(0, 0.1) noise; nine columns are
/// pure noise. Each noise column may be confirmed in at most 5% of runs.
fn boruta_planted() -> Outcome {
    let runs = 20usize;
    let mut planted_hits = 0;
    let mut noise_confirmed = [0usize; 9];
    let mut runs_with_any = 0;
    for seed in 0..runs as u64 {
        let mut r = rng(100 + seed);
        let names: Vec<String> = (0..10).map(|j| if j == 0 { "planted".into() } else { format!("noise{j}") }).collect();
        let mut m = FeatureMatrix::empty(names);
        for i in 0..200 {
            let label = i % 4;
            let mut row: Vec<f64> = (0..10).map(|_| normal(&mut r)).collect();
            row[0] = label as f64 + 0.1 * row[0];
            m.push_row(&row, label, i as u32, 0).unwrap();
        }
        let report = boruta_select(&m, &BorutaConfig { seed, ..BorutaConfig::default() }).map_err(|e| e.to_string())?;
        planted_hits += usize::from(report.status("planted") == Some(FeatureStatus::Confirmed));
        let mut any = false;
        for (j, count) in noise_confirmed.iter_mut().enumerate() {
            if report.status(&format!("noise{}", j + 1)) == Some(FeatureStatus::Confirmed) {
                *count += 1;
                any = true;
            }
        }
        runs_with_any += usize::from(any);
    }
    let worst = *noise_confirmed.iter().max().unwrap();
    let summary = format!(
        "planted confirmed in {planted_hits}/{runs}; each noise feature confirmed in at most {worst}/{runs} runs ({runs_with_any} runs confirm some noise feature)"
    );
    ensure!(planted_hits * 100 >= 95 * runs, "{summary}");
    ensure!((runs - worst) * 100 >= 95 * runs, "{summary}");
    Ok(summary)
}

fn erd_recovery() -> Outcome {
    let fs = 500.0;
    let len = (10.0 * fs) as usize;
    let mut r = rng(9);
    // power factor 1 at rest and 0.5 on the 4-6 s plateau, ramped over 0.5 s
    let gain = |t: f64| {
        let p = if t < 3.5 || t > 6.5 {
            1.0
        } else if t < 4.0 {
            1.0 - (t - 3.5)
        } else if t <= 6.0 {
            0.5
        } else {
            0.5 + (t - 6.0)
        };
        f64::sqrt(p)
    };
    let recs: Vec<Recording> = (0..40)
        .map(|id| {
            let phases: Vec<f64> = (0..4).map(|_| r.random_range(0.0..2.0 * std::f64::consts::PI)).collect();
            let x: Vec<f64> = (0..len)
                .map(|i| {
                    let t = i as f64 / fs;
                    let beta: f64 = [14.0, 21.0, 28.0]
                        .iter()
                        .zip(&phases)
                        .map(|(f, ph)| (2.0 * std::f64::consts::PI * f * t + ph).sin())
                        .sum();
                    let alpha = 0.8 * (2.0 * std::f64::consts::PI * 9.0 * t + phases[3]).sin();
                    gain(t) * beta + alpha + 0.2 * normal(&mut r)
                })
                .collect();
            Recording::new(Modality::Eeg, vec!["C3".into()], fs, vec![x], id).unwrap()
        })
        .collect();
    let refs: Vec<&Recording> = recs.iter().collect();
    let cfg = ErdErsConfig::default();
    let curve = erd_ers_curve(&refs, "C3", &cfg).map_err(|e| e.to_string())?;
    let plateau = curve.mean_between(4.5, 5.5).ok_or("empty plateau")?;
    let baseline = curve.mean_between(cfg.baseline_s[0], cfg.baseline_s[1]).ok_or("empty baseline")?;
    let summary = format!("plateau {plateau:.1}%, baseline {baseline:.2}%");
    ensure!((-60.0..=-40.0).contains(&plateau), "{summary}");
    ensure!(baseline.abs() <= 2.0, "{summary}");
    Ok(summary)
}

const E2E_CONFIG: &str = r#"
[classifier]
folds = 2
[classifier.eeg]
type = "lstm"
hidden = 6
sequence_len = 4
[classifier.eeg.train]
max_epochs = 2
[classifier.emg]
type = "mlp"
hidden = [8]
[classifier.emg.train]
max_epochs = 3
[selection]
max_iterations = 10
[selection.forest]
tree_count = 15
[synth]
trial_count = 6
trial_length_s = 5.0
boundaries_s = [1.2, 2.5, 3.8]
"#;

fn cli_run(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    fs::write(dir.join("pipeline.toml"), E2E_CONFIG).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 9] = [
        &["synth", "--out", "data"],
        &["extract", "--data", "data", "--modality", "eeg", "--out", "eeg.csv"],
        &["extract", "--data", "data", "--modality", "emg", "--out", "emg.csv"],
        &["select", "--features", "emg.csv", "--out", "emg.selection.csv"],
        &["evaluate", "--features", "emg.csv", "--selection", "emg.selection.csv", "--out", "emg.report.csv"],
        &["evaluate", "--features", "eeg.csv", "--out", "eeg.report.csv"],
        &["train", "--features", "eeg.csv", "--out", "eeg.model.json"],
        &["report", "--inputs", "eeg.report.json", "emg.report.json", "--out", "summary.csv"],
        &["fuse-eval", "--data", "data", "--case", "all", "--out", "scenarios.csv"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_biofuse"))
            .current_dir(dir)
            .args(["--config", "pipeline.toml", "--seed", "11"])
            .args(args)
            .env_remove("BIOFUSE_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    cli_run(&a)?;
    cli_run(&b)?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure!(ta.len() == tb.len(), "runs wrote {} and {} files", ta.len(), tb.len());
    let differing: Vec<&str> = ta.iter().zip(&tb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    ensure!(differing.is_empty(), "files differ: {}", differing.join(", "));
    for key in ["eeg.csv", "emg.csv", "emg.report.csv", "eeg.report.csv", "scenarios.csv", "summary.csv"] {
        ensure!(ta.iter().any(|(p, _)| p == key), "{key} was not written");
    }
    Ok(format!("{} files byte-identical across two runs (features, selection, reports, model, scenarios, manifests)", ta.len()))
}

fn channel_reduction() -> Outcome {
    let trials = generate_dataset(&GeneratorConfig::default()).map_err(|e| e.to_string())?;
    let spec = ModelSpec::Knn(KnnConfig::default());
    let cv = CvConfig { folds: 10, seed: 0 };
    let features = EegFeatureConfig::default();
    let acc = |chs: &[String]| -> Result<f64, String> {
        channel_reduction_eval(&trials, chs, &features, &spec, &cv).map(|r| r.accuracy.mean).map_err(|e| e.to_string())
    };
    let all = acc(&features.channels)?;
    let mut best = (String::new(), 0.0);
    for ch in &features.channels {
        let a = acc(std::slice::from_ref(ch))?;
        if a > best.1 {
            best = (ch.clone(), a);
        }
    }
    let summary = format!("7 channels {all:.3} vs best single channel {} {:.3}", best.0, best.1);
    ensure!(all - best.1 >= 0.10, "{summary}");
    Ok(summary)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let picked: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    if args.iter().any(|a| !a.starts_with('-') && a.parse::<usize>().is_err() && !"acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("feature and DSP oracles", feature_oracles),
        ("MLP and LSTM gradient checks", gradient_checks),
        ("kNN against brute force", knn_oracle),
        ("Welch peak, Simpson, flat band power", welch_simpson),
        ("noisiness properties", noisiness_properties),
        ("fusion weights and handoff", fusion_arithmetic),
        ("fusion noise scenarios", fusion_scenario),
        ("Boruta planted feature", boruta_planted),
        ("ERD/ERS recovery", erd_recovery),
        ("end-to-end CLI determinism", cli_determinism),
        ("channel reduction", channel_reduction),
    ];
    let limits = [60, 60, 60, 60, 60, 60, 600, 300, 60, 300, 300];
    let mut failed = 0;
    let mut ran = 0;
    for (i, ((name, f), limit)) in criteria.into_iter().zip(limits).enumerate() {
        if !picked.is_empty() && !picked.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(msg) if secs > limit as f64 => Err(format!("{msg}; exceeded {limit} s")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

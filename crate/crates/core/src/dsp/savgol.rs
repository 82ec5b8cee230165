use crate::error::bail;
use crate::linalg::solve_psd;
use crate::prelude::*;
use crate::Result;

/// Weights that evaluate the least-squares polynomial of degree `polyorder`,
/// fitted over a window of `window_len` samples, at offset `pos` from the
/// window centre.
pub fn savgol_coefficients(window_len: usize, polyorder: usize, pos: isize) -> Result<Vec<f64>> {
    if window_len % 2 == 0 {
        bail!(Config, "Savitzky-Golay window must be odd, got {window_len}");
    }
    if polyorder >= window_len {
        bail!(Config, "polynomial order {polyorder} must be below the window length {window_len}");
    }
    let half = (window_len / 2) as isize;
    let scale = half.max(1) as f64;
    let terms = polyorder + 1;
    let powers = |t: f64| {
        let mut p = vec![1.0; terms];
        for q in 1..terms {
            p[q] = p[q - 1] * t;
        }
        p
    };
    let design: Vec<Vec<f64>> = (-half..=half).map(|j| powers(j as f64 / scale)).collect();
    let mut gram = vec![0.0; terms * terms];
    for row in &design {
        for a in 0..terms {
            for b in 0..terms {
                gram[a * terms + b] += row[a] * row[b];
            }
        }
    }
    let (z, _) = solve_psd(&gram, &powers(pos as f64 / scale), 1e-14);
    Ok(design.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum()).collect())
}

/// Savitzky-Golay smoothing. Interior samples use the centred filter; the
/// first and last `window_len / 2` samples are read off the polynomial fitted
/// to the first and last full window.
pub fn savgol_smooth(x: &[f64], window_len: usize, polyorder: usize) -> Result<Vec<f64>> {
    let centre = savgol_coefficients(window_len, polyorder, 0)?;
    if window_len > x.len() {
        bail!(Input, "Savitzky-Golay window {window_len} exceeds the signal length {}", x.len());
    }
    let half = window_len / 2;
    let n = x.len();
    let dot = |c: &[f64], from: usize| c.iter().zip(&x[from..from + window_len]).map(|(a, b)| a * b).sum::<f64>();
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&centre, i - half);
    }
    for i in 0..half {
        let c = savgol_coefficients(window_len, polyorder, i as isize - half as isize)?;
        out[i] = dot(&c, 0);
        out[n - 1 - i] = dot(&c.iter().rev().copied().collect::<Vec<_>>(), n - window_len);
    }
    Ok(out)
}

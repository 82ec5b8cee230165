use core::f64::consts::FRAC_1_SQRT_2;

use crate::prelude::*;

/// Single-level orthonormal Haar transform, returning `(cA, cD)`.
///
/// Odd-length input is padded by repeating its final sample.
pub fn haar_dwt_level1(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pairs = x.len().div_ceil(2);
    let at = |i: usize| x.get(i).or(x.last()).copied().unwrap_or(0.0);
    (0..pairs)
        .map(|i| {
            let (a, b) = (at(2 * i), at(2 * i + 1));
            ((a + b) * FRAC_1_SQRT_2, (a - b) * FRAC_1_SQRT_2)
        })
        .unzip()
}

/// Inverse of [`haar_dwt_level1`] (returns the padded, even-length signal).
pub fn haar_idwt_level1(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    approx
        .iter()
        .zip(detail)
        .flat_map(|(a, d)| [(a + d) * FRAC_1_SQRT_2, (a - d) * FRAC_1_SQRT_2])
        .collect()
}

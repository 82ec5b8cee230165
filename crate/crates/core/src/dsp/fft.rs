use core::f64::consts::PI;

use num_complex::Complex64;

use crate::prelude::*;

/// A reusable transform of one length.
///
/// Power-of-two lengths use an iterative radix-2 kernel; any other length is
/// mapped onto one via Bluestein's chirp-z identity.
#[derive(Clone, Debug)]
pub struct FftPlan {
    len: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Trivial,
    Radix2 { twiddles: Vec<Complex64> },
    Bluestein { inner: Box<FftPlan>, chirp: Vec<Complex64>, kernel: Vec<Complex64> },
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let kind = if len <= 1 {
            Kind::Trivial
        } else if len.is_power_of_two() {
            Kind::Radix2 {
                twiddles: (0..len / 2)
                    .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                    .collect(),
            }
        } else {
            let m = (2 * len - 1).next_power_of_two();
            let inner = FftPlan::new(m);
            // k^2 is reduced mod 2n so the phase stays accurate for large k
            let chirp: Vec<Complex64> = (0..len)
                .map(|k| {
                    let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                    Complex64::from_polar(1.0, -PI * k2 / len as f64)
                })
                .collect();
            let mut kernel = vec![Complex64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for k in 1..len {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            Kind::Bluestein { inner: Box::new(inner), chirp, kernel }
        };
        FftPlan { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform `X_k = Σ x_n e^{-2πikn/N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match the plan");
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2 { twiddles } => radix2(buf, twiddles),
            Kind::Bluestein { inner, chirp, kernel } => {
                let m = inner.len;
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for ((dst, x), w) in a.iter_mut().zip(buf.iter()).zip(chirp) {
                    *dst = x * w;
                }
                inner.forward(&mut a);
                for (v, k) in a.iter_mut().zip(kernel) {
                    *v *= k;
                }
                inner.inverse(&mut a);
                for ((dst, v), w) in buf.iter_mut().zip(&a).zip(chirp) {
                    *dst = v * w;
                }
            }
        }
    }

    /// In-place inverse transform, including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|v| *v = v.conj());
        self.forward(buf);
        let scale = 1.0 / self.len.max(1) as f64;
        buf.iter_mut().for_each(|v| *v = v.conj() * scale);
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &[Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let stride = n / size;
        for chunk in buf.chunks_exact_mut(size) {
            let (lo, hi) = chunk.split_at_mut(half);
            for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                let t = *b * twiddles[k * stride];
                *b = *a - t;
                *a += t;
            }
        }
        size *= 2;
    }
}

/// Discrete Fourier transform of a real sequence (full two-sided spectrum).
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlan::new(x.len()).forward(&mut buf);
    buf
}

/// Inverse of [`dft`]; returns the complex time-domain sequence.
pub fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    FftPlan::new(buf.len()).inverse(&mut buf);
    buf
}

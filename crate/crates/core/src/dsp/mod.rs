//! Numerical kernels: DFT, Welch PSD, Simpson integration, Butterworth
//! band-pass filtering, Savitzky-Golay smoothing and the level-1 Haar DWT.

mod butter;
mod fft;
mod haar;
mod savgol;
mod simpson;
mod welch;

pub use butter::{butterworth_bandpass, BandpassDesign, Biquad};
pub use fft::{dft, idft, FftPlan};
pub use haar::{haar_dwt_level1, haar_idwt_level1};
pub use savgol::{savgol_coefficients, savgol_smooth};
pub use simpson::simpson_integrate;
pub use welch::{default_segment_len, welch_psd, PsdEstimate, Welch, WelchConfig, WindowFn};

pub use num_complex::Complex64;

//! Hann-windowed magnitude spectrogram, max-normalized, for comparing the
//! QPR encoding against a time-frequency image.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::QprError;
use crate::scsa::Signal;
use crate::Matrix;

pub const DEFAULT_STFT_WINDOW: usize = 64;
pub const DEFAULT_STFT_HOP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_STFT_WINDOW,
            hop: DEFAULT_STFT_HOP,
        }
    }
}

impl StftConfig {
    /// FFT length: `window_len` rounded up to a power of two.
    pub fn n_fft(&self) -> usize {
        self.window_len.next_power_of_two()
    }
}

/// Periodic Hann window of length `n`.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Spectrogram image with one row per frequency bin (`n_fft/2 + 1`, DC in
/// row 0) and one column per frame, divided by its maximum. An all-zero
/// spectrogram is returned unscaled.
pub fn stft_image(signal: &Signal, window_len: usize, hop: usize) -> Result<Matrix, QprError> {
    let x = signal.samples();
    if hop == 0 {
        return Err(QprError::ZeroHop);
    }
    if window_len == 0 || window_len > x.len() {
        return Err(QprError::WindowTooLong {
            window: window_len,
            len: x.len(),
        });
    }
    let n_fft = window_len.next_power_of_two();
    let n_bins = n_fft / 2 + 1;
    let n_frames = (x.len() - window_len) / hop + 1;
    let window = hann(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let mut out = Matrix::zeros(n_bins, n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for frame in 0..n_frames {
        let start = frame * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < window_len {
                Complex::new(x[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (bin, c) in buf.iter().take(n_bins).enumerate() {
            out[(bin, frame)] = c.norm();
        }
    }

    let peak = out.max();
    if peak > 0.0 {
        let (r, c) = out.shape();
        let data = out.into_vec().into_iter().map(|v| v / peak).collect();
        out = Matrix::from_vec(r, c, data);
    }
    Ok(out)
}

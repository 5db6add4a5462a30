//! Quantum pattern recognition: turn a 1-D segment into an `N_h x L` image.
//!
//! The semi-classical parameter is swept as `h = 1/Ω²` over an equispaced
//! Ω grid. Every `h` that yields at least `N_h` bound states is scored by
//! the Euclidean reconstruction residual, the best one is kept, and its
//! component stack divided by its largest entry becomes the image.

mod image_io;
mod stft;

pub use image_io::{
    read_qpri, read_qpri_file, write_pgm, write_pgm_file, write_qpri, write_qpri_file,
    QprMetadata, QPRI_MAGIC, QPRI_VERSION,
};
pub use stft::{stft_image, StftConfig, DEFAULT_STFT_HOP, DEFAULT_STFT_WINDOW};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scsa::{self, ComponentStack, ScsaError, Signal};
use crate::Matrix;

pub const DEFAULT_DEPTH: usize = 20;
pub const DEFAULT_OMEGA_MIN: f64 = 0.5;
pub const DEFAULT_OMEGA_MAX: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QprError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no h in the sweep produced {n_h} components")]
    NoValidCandidate { n_h: usize },
    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),
    #[error("window of {window} samples is longer than the signal ({len})")]
    WindowTooLong { window: usize, len: usize },
    #[error("hop must be at least 1")]
    ZeroHop,
    #[error("pixel ({row}, {col}) = {value} outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Scsa(#[from] ScsaError),
}

impl QprError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::NoValidCandidate { .. } => "NoValidCandidate",
            Self::InvalidSweep(_) => "InvalidSweep",
            Self::WindowTooLong { .. } => "WindowTooLong",
            Self::ZeroHop => "ZeroHop",
            Self::OutOfRange { .. } => "OutOfRange",
            Self::Scsa(e) => e.name(),
        }
    }
}

/// Ω sweep bounds and decomposition depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub n_h: usize,
}

impl SweepConfig {
    /// Uses `floor(n_h / 2)` sweep points.
    pub fn new(omega_min: f64, omega_max: f64, n_h: usize) -> Result<Self, QprError> {
        let cfg = Self {
            omega_min,
            omega_max,
            n_points: n_h / 2,
            n_h,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), QprError> {
        if !(self.omega_min > 0.0 && self.omega_min.is_finite() && self.omega_max.is_finite()) {
            return Err(QprError::InvalidSweep(format!(
                "omega bounds must be positive and finite ({}, {})",
                self.omega_min, self.omega_max
            )));
        }
        if self.omega_min >= self.omega_max {
            return Err(QprError::InvalidSweep(format!(
                "omega_min {} must be below omega_max {}",
                self.omega_min, self.omega_max
            )));
        }
        if self.n_h == 0 || self.n_points == 0 {
            return Err(QprError::InvalidSweep(format!(
                "need n_h >= 2 for at least one sweep point (n_h = {}, n_points = {})",
                self.n_h, self.n_points
            )));
        }
        Ok(())
    }

    /// The Ω grid, `linspace(omega_min, omega_max, n_points)`.
    pub fn omegas(&self) -> Vec<f64> {
        linspace(self.omega_min, self.omega_max, self.n_points)
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::new(DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX, DEFAULT_DEPTH).expect("valid defaults")
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

/// One point of the sweep. `error` is `None` when the decomposition at
/// this `h` failed or produced an all-zero reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCandidate {
    pub omega: f64,
    pub h: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QprImage {
    pub segment_id: String,
    /// `N_h x L`, entries in `[0, 1]`, max entry 1.
    pub pixels: Matrix,
    pub h_selected: f64,
    pub recon_error: f64,
    pub sweep: Vec<SweepCandidate>,
}

/// `||y - y_h||₂`.
pub fn reconstruction_error(y: &[f64], y_h: &[f64]) -> Result<f64, QprError> {
    if y.len() != y_h.len() {
        return Err(QprError::LengthMismatch {
            left: y.len(),
            right: y_h.len(),
        });
    }
    let scale = y
        .iter()
        .zip(y_h)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let ss: f64 = y
        .iter()
        .zip(y_h)
        .map(|(a, b)| {
            let r = (a - b) / scale;
            r * r
        })
        .sum();
    Ok(scale * ss.sqrt())
}

/// Runs the h sweep on an amplitude-normalized signal and returns the
/// normalized component image at the best `h`.
pub fn quantum_pattern_recognition(
    signal: &Signal,
    cfg: &SweepConfig,
    segment_id: &str,
) -> Result<QprImage, QprError> {
    cfg.validate()?;
    let mut sweep = Vec::with_capacity(cfg.n_points);
    let mut best: Option<(f64, ComponentStack)> = None;

    for omega in cfg.omegas() {
        let h = 1.0 / (omega * omega);
        let error = match scsa::scsa_reconstruction(h, signal, cfg.n_h) {
            Ok(stack) if stack.reconstruction.iter().any(|&v| v != 0.0) => {
                let err = reconstruction_error(signal.samples(), &stack.reconstruction)?;
                // Strict comparison keeps the first minimum in Ω order.
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    best = Some((err, stack));
                }
                Some(err)
            }
            Ok(_) | Err(ScsaError::InsufficientSpectrum { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        sweep.push(SweepCandidate { omega, h, error });
    }

    let (recon_error, stack) = best.ok_or(QprError::NoValidCandidate { n_h: cfg.n_h })?;
    let pixels = normalize_by_max(stack.components);
    Ok(QprImage {
        segment_id: segment_id.to_string(),
        pixels,
        h_selected: stack.h,
        recon_error,
        sweep,
    })
}

fn normalize_by_max(components: Matrix) -> Matrix {
    let peak = components.max_abs();
    if peak == 0.0 {
        return components;
    }
    let (r, c) = components.shape();
    let data = components.into_vec().into_iter().map(|v| v / peak).collect();
    Matrix::from_vec(r, c, data)
}

/// 8-bit rendering: `round(255 v)`, halves rounded away from zero.
pub fn to_grayscale(pixels: &Matrix) -> Result<Vec<u8>, QprError> {
    let cols = pixels.cols();
    pixels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(0.0..=1.0).contains(&v) {
                return Err(QprError::OutOfRange {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                    value: v,
                });
            }
            Ok((255.0 * v).round().clamp(0.0, 255.0) as u8)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse_train(len: usize, fs: f64, bpm: f64) -> Signal {
        let period = 60.0 / bpm;
        let raw: Vec<f64> = (0..len)
            .map(|i| {
                let ph = (i as f64 / fs % period) / period;
                (-((ph - 0.25) / 0.08).powi(2) / 2.0).exp()
                    + 0.4 * (-((ph - 0.55) / 0.1).powi(2) / 2.0).exp()
            })
            .collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Signal::new(raw.iter().map(|v| (v - lo) / (hi - lo)).collect(), fs).unwrap()
    }

    #[test]
    fn residual_norm_examples() {
        assert_eq!(reconstruction_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let e = reconstruction_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((e - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            reconstruction_error(&[1.0], &[1.0, 2.0]),
            Err(QprError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn default_sweep() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.n_points, 10);
        let om = cfg.omegas();
        assert_eq!(om.len(), 10);
        assert_eq!(om[0], 0.5);
        assert_eq!(om[9], 12.0);
    }

    #[test]
    fn sweep_validation() {
        assert!(SweepConfig::new(2.0, 1.0, 20).is_err());
        assert!(SweepConfig::new(0.0, 1.0, 20).is_err());
        assert!(SweepConfig::new(0.5, 1.0, 1).is_err());
        assert_eq!(SweepConfig::new(0.5, 1.0, 3).unwrap().n_points, 1);
    }

    #[test]
    fn zero_signal_has_no_candidate() {
        let s = Signal::new(vec![0.0; 500], 100.0).unwrap();
        assert_eq!(
            quantum_pattern_recognition(&s, &SweepConfig::default(), "z"),
            Err(QprError::NoValidCandidate { n_h: 20 })
        );
    }

    #[test]
    fn pulse_train_image() {
        let s = pulse_train(500, 100.0, 72.0);
        let img = quantum_pattern_recognition(&s, &SweepConfig::default(), "p").unwrap();
        assert_eq!(img.pixels.shape(), (20, 500));
        assert_eq!(img.pixels.max(), 1.0);
        assert!(img.pixels.min() >= 0.0);
        let valid: Vec<f64> = img.sweep.iter().filter_map(|c| c.error).collect();
        assert!(!valid.is_empty());
        let min = valid.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(img.recon_error, min);
        let energy = |r: usize| img.pixels.row(r).iter().sum::<f64>();
        assert!(energy(0) >= energy(19));
    }

    #[test]
    fn deeper_truncation_reconstructs_better() {
        let s = pulse_train(500, 100.0, 66.0);
        let h = 1.0 / 36.0;
        let op = scsa::build_operator(&s, h).unwrap();
        let spec = scsa::solve_negative_spectrum(&op, h, s.dt()).unwrap();
        let e20 = scsa::components_from_spectrum(&spec, 20).unwrap();
        let e5 = scsa::components_from_spectrum(&spec, 5).unwrap();
        let r20 = reconstruction_error(s.samples(), &e20.reconstruction).unwrap();
        let r5 = reconstruction_error(s.samples(), &e5.reconstruction).unwrap();
        assert!(r20 < r5, "{r20} vs {r5}");
    }

    #[test]
    fn grayscale_rounding() {
        let m = Matrix::from_vec(1, 3, vec![0.0, 0.5, 1.0]);
        assert_eq!(to_grayscale(&m).unwrap(), vec![0, 128, 255]);
        let bad = Matrix::from_vec(1, 2, vec![0.2, 1.5]);
        assert!(matches!(
            to_grayscale(&bad),
            Err(QprError::OutOfRange { row: 0, col: 1, .. })
        ));
    }
}

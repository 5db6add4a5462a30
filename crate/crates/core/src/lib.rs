//! Photoplethysmography (PPG) segment quality assessment built on
//! semi-classical signal analysis.
//!
//! A 500-sample PPG window is treated as the potential of a discretized
//! Schrödinger operator. The bound states of that operator decompose the
//! window into non-negative pulse-shaped components; stacking the first
//! `N_h` of them yields a 2-D "quantum pattern recognition" (QPR) image
//! which a slim convolutional network scores as good or bad.
//!
//! Module map:
//!
//! - [`scsa`]: operator assembly, tridiagonal eigensolver, reconstruction.
//! - [`qpr`]: semi-classical parameter sweep, image encoding, STFT images.
//! - [`ingest`]: windowing, amplitude normalization, segment/annotation files.
//! - [`sqi`]: skewness / kurtosis / perfusion features and a logistic baseline.
//! - [`cnn`]: forward-pass engine for the slim-CNN and its weight bundle format.
//! - [`metrics`]: confusion statistics, ROC curve and AUC.
//! - [`synth`]: seeded synthetic PPG segments with known labels.
//! - [`cli`]: the `ppg-qpr` command-line front end.

pub mod cli;
pub mod cnn;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod qpr;
pub mod scsa;
pub mod sqi;
pub mod synth;

mod fsio;

pub use matrix::Matrix;
pub use scsa::Signal;

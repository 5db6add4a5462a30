//! Seeded synthetic PPG segments with known quality labels.
//!
//! Clean beats are a double Gaussian (systolic peak plus a smaller
//! dicrotic bump) repeated at a random rate on a positive DC level. Bad
//! segments are clean segments hit by one motion-style artifact.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Label, SegmentRecord, SEGMENT_LEN};

// Beat template, in fractions of one beat period.
const SYSTOLIC_CENTER: f64 = 0.22;
const SYSTOLIC_WIDTH: f64 = 0.07;
const DICROTIC_CENTER: f64 = 0.52;
const DICROTIC_WIDTH: f64 = 0.09;
const DICROTIC_GAIN: f64 = 0.35;
/// Sensor DC level the pulse rides on, in raw units.
const DC_LEVEL: f64 = 5.0;
/// Noise standard deviation is at most this fraction of the pulse amplitude.
const MAX_NOISE_FRACTION: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("artifact proportions must be non-negative and sum to 1 (sum {0})")]
    BadMix(f64),
    #[error("beat rate range [{0}, {1}] must lie within [40, 180] bpm")]
    BadRate(f64, f64),
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
}

impl SynthError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BadMix(_) => "BadMix",
            Self::BadRate(..) => "BadRate",
            Self::BadSamplingRate(_) => "BadSamplingRate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    BaselineWander,
    Burst,
    Dropout,
    Saturation,
}

/// Relative frequency of each artifact kind among bad segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMix {
    pub baseline_wander: f64,
    pub burst: f64,
    pub dropout: f64,
    pub saturation: f64,
}

impl Default for ArtifactMix {
    fn default() -> Self {
        Self {
            baseline_wander: 0.25,
            burst: 0.25,
            dropout: 0.25,
            saturation: 0.25,
        }
    }
}

impl ArtifactMix {
    fn pick(&self, u: f64) -> ArtifactKind {
        let mut acc = self.baseline_wander;
        if u < acc {
            return ArtifactKind::BaselineWander;
        }
        acc += self.burst;
        if u < acc {
            return ArtifactKind::Burst;
        }
        acc += self.dropout;
        if u < acc {
            return ArtifactKind::Dropout;
        }
        ArtifactKind::Saturation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_good: usize,
    pub n_bad: usize,
    pub fs: f64,
    pub seed: u64,
    pub bpm_min: f64,
    pub bpm_max: f64,
    pub artifact_mix: ArtifactMix,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_good: 10,
            n_bad: 10,
            fs: 100.0,
            seed: 0,
            bpm_min: 50.0,
            bpm_max: 110.0,
            artifact_mix: ArtifactMix::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(SynthError::BadSamplingRate(self.fs));
        }
        if !(40.0 <= self.bpm_min && self.bpm_min <= self.bpm_max && self.bpm_max <= 180.0) {
            return Err(SynthError::BadRate(self.bpm_min, self.bpm_max));
        }
        let m = &self.artifact_mix;
        let parts = [m.baseline_wander, m.burst, m.dropout, m.saturation];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::BadMix(sum));
        }
        Ok(())
    }
}

fn rng_for(seed: u64, k: usize, bad: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * k as u64 + u64::from(bad));
    rng
}

fn beat(phase: f64) -> f64 {
    let g = |c: f64, w: f64| (-0.5 * ((phase - c) / w).powi(2)).exp();
    g(SYSTOLIC_CENTER, SYSTOLIC_WIDTH) + DICROTIC_GAIN * g(DICROTIC_CENTER, DICROTIC_WIDTH)
}

/// A clean segment at a fixed beat rate. `amplitude` scales the pulse,
/// `noise_fraction` (clamped to 2%) sets the white-noise level.
pub fn clean_pulse_train<R: Rng>(
    rng: &mut R,
    fs: f64,
    bpm: f64,
    amplitude: f64,
    noise_fraction: f64,
) -> Vec<f64> {
    let period = 60.0 / bpm;
    let offset = rng.random_range(0.0..period);
    let sigma = amplitude * noise_fraction.clamp(0.0, MAX_NOISE_FRACTION);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    (0..SEGMENT_LEN)
        .map(|i| {
            let t = i as f64 / fs + offset;
            let phase = (t % period) / period;
            DC_LEVEL + amplitude * beat(phase) + noise.sample(rng)
        })
        .collect()
}

fn draw_clean(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let bpm = if cfg.bpm_max > cfg.bpm_min {
        rng.random_range(cfg.bpm_min..cfg.bpm_max)
    } else {
        cfg.bpm_min
    };
    let amplitude = rng.random_range(0.8..1.2);
    let noise = rng.random_range(0.0..MAX_NOISE_FRACTION);
    (clean_pulse_train(rng, cfg.fs, bpm, amplitude, noise), bpm)
}

/// Good segment `k`; a pure function of `(cfg.seed, k)`.
pub fn gen_good(cfg: &SynthConfig, k: usize) -> Vec<f64> {
    let mut rng = rng_for(cfg.seed, k, false);
    draw_clean(cfg, &mut rng).0
}

/// A corrupted segment together with the clean source it was made from.
#[derive(Debug, Clone, PartialEq)]
pub struct BadSegment {
    pub samples: Vec<f64>,
    pub clean: Vec<f64>,
    pub artifact: ArtifactKind,
}

/// Bad segment `k` with its artifact drawn from `cfg.artifact_mix`.
pub fn gen_bad(cfg: &SynthConfig, k: usize) -> BadSegment {
    let mut rng = rng_for(cfg.seed, k, true);
    let kind = cfg.artifact_mix.pick(rng.random_range(0.0..1.0));
    corrupt(cfg, &mut rng, kind)
}

/// Bad segment `k` with a forced artifact kind.
pub fn gen_bad_with(cfg: &SynthConfig, k: usize, kind: ArtifactKind) -> BadSegment {
    let mut rng = rng_for(cfg.seed, k, true);
    let _ = rng.random_range(0.0..1.0);
    corrupt(cfg, &mut rng, kind)
}

fn corrupt(cfg: &SynthConfig, rng: &mut ChaCha8Rng, kind: ArtifactKind) -> BadSegment {
    let (clean, _) = draw_clean(cfg, rng);
    let mut x = clean.clone();
    let n = x.len();
    let fs = cfg.fs;
    match kind {
        ArtifactKind::BaselineWander => {
            let amp = rng.random_range(1.5..3.0);
            let f = rng.random_range(0.1..0.4);
            let phi = rng.random_range(0.0..2.0 * PI);
            let amp2 = rng.random_range(0.3..1.0);
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *v += amp * (2.0 * PI * f * t + phi).sin() + amp2 * (2.0 * PI * 2.7 * f * t).sin();
            }
        }
        ArtifactKind::Burst => {
            let len = ((rng.random_range(0.6..1.5) * fs) as usize).min(n);
            let start = rng.random_range(0..=n - len);
            let scale = rng.random_range(2.5..5.0);
            let noise = Normal::new(0.0, scale).expect("valid sigma");
            for v in &mut x[start..start + len] {
                *v += noise.sample(rng);
            }
        }
        ArtifactKind::Dropout => {
            let min_len = fs.ceil() as usize;
            let len = rng.random_range(min_len..=(2.5 * fs) as usize).min(n);
            let start = rng.random_range(0..=n - len);
            let level = rng.random_range(0.0..0.5);
            x[start..start + len].iter_mut().for_each(|v| *v = level);
        }
        ArtifactKind::Saturation => {
            let gain = rng.random_range(2.5..4.0);
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v = mean + gain * (*v - mean));
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            // Clip the top 20-35% of samples flat.
            let q = rng.random_range(0.65..0.8);
            let clip = sorted[(q * n as f64) as usize];
            x.iter_mut().for_each(|v| *v = v.min(clip));
        }
    }
    BadSegment {
        samples: x,
        clean,
        artifact: kind,
    }
}

/// The full labeled dataset: `n_good` good segments (`synth_g00000`, ...)
/// followed by `n_bad` bad ones (`synth_b00000`, ...), subject `synth`.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SegmentRecord>, SynthError> {
    cfg.validate()?;
    let good = (0..cfg.n_good).map(|k| SegmentRecord {
        segment_id: format!("synth_g{k:05}"),
        subject: "synth".into(),
        start_index: k * SEGMENT_LEN,
        samples: gen_good(cfg, k),
        fs: cfg.fs,
        label: Label::Good,
    });
    let bad = (0..cfg.n_bad).map(|k| SegmentRecord {
        segment_id: format!("synth_b{k:05}"),
        subject: "synth".into(),
        start_index: k * SEGMENT_LEN,
        samples: gen_bad(cfg, k).samples,
        fs: cfg.fs,
        label: Label::Bad,
    });
    Ok(good.chain(bad).collect())
}

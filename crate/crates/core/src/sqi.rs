//! Classical signal quality indices and a logistic-regression baseline.
//!
//! Skewness and kurtosis use population central moments (`m3/m2^1.5`,
//! non-excess `m4/m2²`). Perfusion is `100 (max - min) / mean` of the raw,
//! un-normalized window.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Label;

pub const N_FEATURES: usize = 3;

#[derive(Debug, Error)]
pub enum SqiError {
    #[error("window has zero variance")]
    ZeroVariance,
    #[error("window mean {0} is not positive, perfusion undefined")]
    ZeroMean(f64),
    #[error("window is empty")]
    Empty,
    #[error("training data needs both classes")]
    SingleClassData,
    #[error("feature row {row} is not finite")]
    NonFiniteFeature { row: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature row {row} has {found} values, expected {expected}")]
    FeatureWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
}

impl SqiError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ZeroVariance => "ZeroVariance",
            Self::ZeroMean(_) => "ZeroMean",
            Self::Empty => "Empty",
            Self::SingleClassData => "SingleClassData",
            Self::NonFiniteFeature { .. } => "NonFiniteFeature",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::FeatureWidth { .. } => "FeatureWidth",
            Self::Csv(_) => "Csv",
            Self::Json(_) => "Json",
            Self::BadRow { .. } => "BadRow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqiFeatures {
    pub segment_id: String,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Percent.
    pub perfusion: f64,
}

impl SqiFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.skewness, self.kurtosis, self.perfusion]
    }
}

pub fn skewness_kurtosis(x: &[f64]) -> Result<(f64, f64), SqiError> {
    if x.is_empty() {
        return Err(SqiError::Empty);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // Relative threshold so rounding noise on a constant window counts as zero.
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m2 <= (1e-14 * scale).powi(2) {
        return Err(SqiError::ZeroVariance);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

pub fn perfusion(raw: &[f64]) -> Result<f64, SqiError> {
    if raw.is_empty() {
        return Err(SqiError::Empty);
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if !(mean > 0.0) {
        return Err(SqiError::ZeroMean(mean));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(100.0 * (hi - lo) / mean)
}

/// All three indices of a raw (pre-normalization) window.
pub fn sqi_features(segment_id: &str, raw: &[f64]) -> Result<SqiFeatures, SqiError> {
    let (skewness, kurtosis) = skewness_kurtosis(raw)?;
    Ok(SqiFeatures {
        segment_id: segment_id.to_string(),
        skewness,
        kurtosis,
        perfusion: perfusion(raw)?,
    })
}

/// Logistic model on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

impl LinearModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_means.iter().zip(&self.feature_stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn to_json(&self) -> Result<String, SqiError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, SqiError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Probability of the positive (good) class.
pub fn predict_linear(model: &LinearModel, x: &[f64]) -> f64 {
    let z = model
        .weights
        .iter()
        .zip(model.standardize(x))
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + model.bias;
    sigmoid(z)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean binary cross-entropy before each epoch's update, plus the final
    /// loss as the last entry.
    pub losses: Vec<f64>,
    pub final_loss: f64,
}

/// Mean binary cross-entropy and its gradient with respect to
/// `(weights, bias)`, on already standardized rows.
pub fn loss_and_gradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[bool]) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias;
        let t = if label { 1.0 } else { 0.0 };
        // log(1 + e^z) - t z, evaluated without overflow.
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (loss / n, gw, gb / n)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Fits a logistic regression by full-batch gradient descent on
/// standardized features. `labels[i]` is true for good.
///
/// Rows are put in a canonical order first, so the fitted model does not
/// depend on the order the samples were given in.
pub fn train_linear_baseline(
    features: &[Vec<f64>],
    labels: &[bool],
    opts: &TrainOptions,
) -> Result<(LinearModel, TrainReport), SqiError> {
    if features.len() != labels.len() {
        return Err(SqiError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if !(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)) {
        return Err(SqiError::SingleClassData);
    }
    let dim = features[0].len();
    for (row, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(SqiError::FeatureWidth {
                row,
                expected: dim,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(SqiError::NonFiniteFeature { row });
        }
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = features[a].iter().map(|v| v.to_bits());
        let kb = features[b].iter().map(|v| v.to_bits());
        ka.cmp(kb).then(labels[a].cmp(&labels[b]))
    });

    let n = features.len() as f64;
    let mut means = vec![0.0; dim];
    for &i in &order {
        for (m, v) in means.iter_mut().zip(&features[i]) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; dim];
    for &i in &order {
        for ((s, v), m) in stds.iter_mut().zip(&features[i]).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if !(*s > 0.0) {
            *s = 1.0;
        }
    }

    let mut model = LinearModel {
        weights: vec![0.0; dim],
        bias: 0.0,
        feature_means: means,
        feature_stds: stds,
    };
    let x: Vec<Vec<f64>> = order.iter().map(|&i| model.standardize(&features[i])).collect();
    let y: Vec<bool> = order.iter().map(|&i| labels[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for w in &mut model.weights {
        *w = rng.random_range(-0.01..0.01);
    }

    let mut losses = Vec::with_capacity(opts.epochs + 1);
    for _ in 0..opts.epochs {
        let (loss, gw, gb) = loss_and_gradient(&model.weights, model.bias, &x, &y);
        losses.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= opts.lr * g;
        }
        model.bias -= opts.lr * gb;
    }
    let (final_loss, _, _) = loss_and_gradient(&model.weights, model.bias, &x, &y);
    losses.push(final_loss);
    Ok((model, TrainReport { losses, final_loss }))
}

/// A feature CSV row: `segment_id,skewness,kurtosis,perfusion,label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub segment_id: String,
    pub skewness: f64,
    pub kurtosis: f64,
    pub perfusion: f64,
    pub label: Label,
}

impl FeatureRow {
    pub fn values(&self) -> Vec<f64> {
        vec![self.skewness, self.kurtosis, self.perfusion]
    }
}

pub fn write_feature_csv<W: Write>(w: W, rows: &[FeatureRow]) -> Result<(), SqiError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record(["segment_id", "skewness", "kurtosis", "perfusion", "label"])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(r: R) -> Result<Vec<FeatureRow>, SqiError> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(SqiError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_signal_has_zero_skew() {
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * i as f64 / 1000.0).sin() + 3.0).collect();
        let (s, _) = skewness_kurtosis(&x).unwrap();
        assert!(s.abs() < 1e-9, "{s}");
    }

    #[test]
    fn perfusion_direct() {
        assert!((perfusion(&[1.0, 3.0]).unwrap() - 100.0).abs() < 1e-12);
        assert!(matches!(perfusion(&[-1.0, 1.0]), Err(SqiError::ZeroMean(_))));
    }

    #[test]
    fn constant_window_rejected() {
        assert!(matches!(skewness_kurtosis(&[2.0; 20]), Err(SqiError::ZeroVariance)));
        assert!(matches!(skewness_kurtosis(&[0.1; 7]), Err(SqiError::ZeroVariance)));
    }

    #[test]
    fn untrained_model_is_indifferent() {
        let m = LinearModel {
            weights: vec![0.0; 3],
            bias: 0.0,
            feature_means: vec![0.0; 3],
            feature_stds: vec![1.0; 3],
        };
        assert_eq!(predict_linear(&m, &[1.0, 2.0, 3.0]), 0.5);
        let big = LinearModel { bias: 800.0, ..m.clone() };
        assert_eq!(predict_linear(&big, &[0.0; 3]), 1.0);
        let x = [0.3, -1.2, 2.0];
        let hand = LinearModel {
            weights: vec![0.5, 0.25, -1.0],
            bias: 0.1,
            feature_means: vec![0.1, 0.2, 0.3],
            feature_stds: vec![2.0, 4.0, 0.5],
        };
        let z: f64 = 0.5 * (0.3 - 0.1) / 2.0 + 0.25 * (-1.2 - 0.2) / 4.0 - 1.0 * (2.0 - 0.3) / 0.5 + 0.1;
        assert!((predict_linear(&hand, &x) - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
    }

    #[test]
    fn separable_1d_data_fits_perfectly() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let (m, _) = train_linear_baseline(&x, &y, &TrainOptions { epochs: 2000, lr: 1.0, seed: 1 }).unwrap();
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(f, &l)| (predict_linear(&m, f) >= 0.5) == l)
            .count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn training_errors() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_linear_baseline(&x, &[true, true], &TrainOptions::default()),
            Err(SqiError::SingleClassData)
        ));
        let nan = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(
            train_linear_baseline(&nan, &[true, false], &TrainOptions::default()),
            Err(SqiError::NonFiniteFeature { row: 1 })
        ));
    }

    #[test]
    fn sample_order_does_not_matter() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos() * 5.0, i as f64])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 7) % 3 == 0).collect();
        let opts = TrainOptions { epochs: 50, lr: 0.3, seed: 4 };
        let (a, _) = train_linear_baseline(&x, &y, &opts).unwrap();
        let mut idx: Vec<usize> = (0..30).rev().collect();
        idx.swap(3, 17);
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
        let (b, _) = train_linear_baseline(&xs, &ys, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_csv_roundtrip() {
        let rows = vec![FeatureRow {
            segment_id: "a".into(),
            skewness: 0.25,
            kurtosis: 3.5,
            perfusion: 18.0,
            label: Label::Bad,
        }];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("segment_id,skewness,kurtosis,perfusion,label\n"));
        assert_eq!(read_feature_csv(&buf[..]).unwrap(), rows);
    }
}

//! Forward-pass engine for the slim-CNN that scores QPR images.
//!
//! The network is a Conv/BN/ReLU stem followed by three slim modules
//! (squeeze, a 1×1 branch and a depthwise-separable branch, concatenated
//! and added to a projected skip path), global average pooling and a small
//! dense head ending in a single sigmoid unit. Weights come from a
//! [`WeightBundle`] in the portable QPRW format; computation is in `f64`.

mod arch;
mod bundle;
pub mod ops;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arch::{
    forward, forward_trace, slim_module, ArchitectureSpec, SlimChannels, SlimCnn, SlimWeights,
    StageShape, INPUT_SHAPE, SLIM_CHANNELS,
};
pub use bundle::{
    load_weights, read_bundle, save_weights, write_bundle, BundleShapeError, NamedArray,
    ShapeOffense, WeightBundle, QPRW_MAGIC, QPRW_VERSION,
};

use crate::ingest::Label;
use crate::Matrix;

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch-norm variance of channel {channel} is not positive ({value})")]
    NonPositiveVar { channel: usize, value: f64 },
    #[error("input pixel ({row}, {col}) = {value} is outside [0, 1]")]
    InputOutOfRange { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    BundleShape(#[from] BundleShapeError),
    #[error("not a weight bundle (bad magic)")]
    BadMagic,
    #[error("unsupported weight bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {code} for array {array:?}")]
    UnsupportedDtype { array: String, code: u8 },
    #[error("file truncated while reading {}", .array.as_deref().unwrap_or("the header"))]
    TruncatedFile { array: Option<String> },
    #[error("array header does not match its contents: {0}")]
    ShapeHeaderMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CnnError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ShapeMismatch(_) => "ShapeMismatch",
            Self::NonPositiveVar { .. } => "NonPositiveVar",
            Self::InputOutOfRange { .. } => "InputOutOfRange",
            Self::BundleShape(_) => "BundleShapeError",
            Self::BadMagic => "BadMagic",
            Self::UnsupportedVersion(_) => "UnsupportedVersion",
            Self::UnsupportedDtype { .. } => "UnsupportedDtype",
            Self::TruncatedFile { .. } => "TruncatedFile",
            Self::ShapeHeaderMismatch(_) => "ShapeHeaderMismatch",
            Self::Io(_) => "Io",
        }
    }
}

/// Channel-major feature map; within a channel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, CnnError> {
        if data.len() != channels * height * width {
            return Err(CnnError::ShapeMismatch(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Single-channel tensor holding `m`.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            channels: 1,
            height: m.rows(),
            width: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Dense 4-D kernel `[out, in, kh, kw]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self, CnnError> {
        let [out_ch, in_ch, kh, kw] = shape;
        if data.len() != out_ch * in_ch * kh * kw {
            return Err(CnnError::ShapeMismatch(format!(
                "{} values for a {out_ch}x{in_ch}x{kh}x{kw} kernel",
                data.len()
            )));
        }
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.out_ch, self.in_ch, self.kh, self.kw]
    }

    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.data[((o * self.in_ch + i) * self.kh + ky) * self.kw + kx]
    }
}

/// Per-channel batch-norm statistics in inference form.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    /// `gamma = 1, beta = 0, mean = 0, var = 1 - eps`, an identity up to rounding.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0 - ops::BN_EPS; channels],
        }
    }
}

/// Convolution followed by batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn {
    pub kernel: Kernel,
    pub bias: Vec<f64>,
    pub bn: BatchNorm,
}

/// One row of the prediction CSV `segment_id,probability,label_pred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub segment_id: String,
    pub probability: f64,
    pub label_pred: Label,
}

impl Prediction {
    /// `label_pred` is good iff `probability >= threshold`.
    pub fn new(segment_id: impl Into<String>, probability: f64, threshold: f64) -> Self {
        let label_pred = if probability >= threshold {
            Label::Good
        } else {
            Label::Bad
        };
        Self {
            segment_id: segment_id.into(),
            probability,
            label_pred,
        }
    }
}

pub fn write_predictions<W: Write>(w: W, rows: &[Prediction]) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(["segment_id", "probability", "label_pred"])?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<Prediction>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

use super::bundle::{BundleShapeError, ShapeOffense, WeightBundle};
use super::ops::{
    add, concat_channels, conv_bn, conv_bn_relu, dense, depthwise_bn_relu, gap, maxpool2,
    relu_in_place, sigmoid,
};
use super::{BatchNorm, CnnError, ConvBn, Kernel, Tensor3};
use crate::Matrix;

/// `[channels, height, width]` of the network input.
pub const INPUT_SHAPE: [usize; 3] = [1, 20, 500];
const STEM_CHANNELS: usize = 16;
const STEM_KERNEL: usize = 7;
const STEM_PAD: usize = 3;
const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlimChannels {
    pub input: usize,
    pub squeeze: usize,
    /// Width of each branch; the module outputs `2 * expand` channels.
    pub expand: usize,
}

pub const SLIM_CHANNELS: [SlimChannels; 3] = [
    SlimChannels { input: 16, squeeze: 16, expand: 24 },
    SlimChannels { input: 48, squeeze: 24, expand: 36 },
    SlimChannels { input: 72, squeeze: 36, expand: 48 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub name: &'static str,
    /// Vectors (after pooling to one value per channel) are `[n, 1, 1]`.
    pub shape: [usize; 3],
}

/// The fixed network layout and the arrays a bundle must provide for it.
pub struct ArchitectureSpec;

fn conv_arrays(out: &mut Vec<(String, Vec<usize>)>, prefix: &str, w: [usize; 4]) {
    out.push((format!("{prefix}.conv.w"), w.to_vec()));
    out.push((format!("{prefix}.conv.b"), vec![w[0]]));
    for p in ["gamma", "beta", "mean", "var"] {
        out.push((format!("{prefix}.bn.{p}"), vec![w[0]]));
    }
}

impl ArchitectureSpec {
    /// Every required array name with its exact shape, in canonical order.
    pub fn required_arrays() -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        conv_arrays(&mut out, "stem", [STEM_CHANNELS, 1, STEM_KERNEL, STEM_KERNEL]);
        for (k, ch) in SLIM_CHANNELS.iter().enumerate() {
            let p = format!("slim{}", k + 1);
            conv_arrays(&mut out, &format!("{p}.squeeze"), [ch.squeeze, ch.input, 1, 1]);
            conv_arrays(&mut out, &format!("{p}.brA"), [ch.expand, ch.squeeze, 1, 1]);
            conv_arrays(&mut out, &format!("{p}.brB.dw"), [ch.squeeze, 1, 3, 3]);
            conv_arrays(&mut out, &format!("{p}.brB.pw"), [ch.expand, ch.squeeze, 1, 1]);
            conv_arrays(&mut out, &format!("{p}.skip"), [2 * ch.expand, ch.input, 1, 1]);
        }
        let feat = 2 * SLIM_CHANNELS[2].expand;
        out.push(("head.fc1.w".into(), vec![HIDDEN, feat]));
        out.push(("head.fc1.b".into(), vec![HIDDEN]));
        out.push(("head.fc2.w".into(), vec![1, HIDDEN]));
        out.push(("head.fc2.b".into(), vec![1]));
        out
    }

    pub fn param_count() -> usize {
        Self::required_arrays()
            .iter()
            .map(|(_, d)| d.iter().product::<usize>())
            .sum()
    }

    /// Output shape after each stage for the fixed input.
    pub fn stage_shapes() -> Vec<StageShape> {
        let [_, h, w] = INPUT_SHAPE;
        let s = |name, c, h, w| StageShape { name, shape: [c, h, w] };
        let out = |k: usize| 2 * SLIM_CHANNELS[k].expand;
        vec![
            s("input", 1, h, w),
            s("stem", STEM_CHANNELS, h, w),
            s("pool1", STEM_CHANNELS, h / 2, w / 2),
            s("slim1", out(0), h / 2, w / 2),
            s("pool2", out(0), h / 4, w / 4),
            s("slim2", out(1), h / 4, w / 4),
            s("pool3", out(1), h / 4 / 2, w / 4 / 2),
            s("slim3", out(2), h / 4 / 2, w / 4 / 2),
            s("gap", out(2), 1, 1),
            s("fc1", HIDDEN, 1, 1),
            s("fc2", 1, 1, 1),
        ]
    }

    /// Checks names, shapes and batch-norm variances; reports every offender.
    /// Arrays the architecture does not use are ignored.
    pub fn validate(bundle: &WeightBundle) -> Result<(), BundleShapeError> {
        let mut offenders = Vec::new();
        for (name, expected) in Self::required_arrays() {
            match bundle.get(&name) {
                None => offenders.push(ShapeOffense {
                    name,
                    expected,
                    found: None,
                    problem: "missing".into(),
                }),
                Some(a) if a.dims != expected || a.data.len() != a.numel() => {
                    offenders.push(ShapeOffense {
                        name,
                        found: Some(a.dims.clone()),
                        expected,
                        problem: "wrong shape".into(),
                    })
                }
                Some(a) if name.ends_with(".var") && a.data.iter().any(|v| !(*v > 0.0)) => {
                    offenders.push(ShapeOffense {
                        name,
                        found: Some(a.dims.clone()),
                        expected,
                        problem: "non-positive variance".into(),
                    })
                }
                Some(_) => {}
            }
        }
        if offenders.is_empty() {
            Ok(())
        } else {
            Err(BundleShapeError { offenders })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlimWeights {
    pub squeeze: ConvBn,
    pub br_a: ConvBn,
    /// Depthwise 3×3, kernel `[C_s, 1, 3, 3]`.
    pub br_b_dw: ConvBn,
    pub br_b_pw: ConvBn,
    pub skip: ConvBn,
}

/// Squeeze, then a 1×1 branch and a depthwise-separable branch,
/// concatenated, plus a projected skip path, then ReLU.
pub fn slim_module(x: &Tensor3, w: &SlimWeights) -> Result<Tensor3, CnnError> {
    let s = conv_bn_relu(x, &w.squeeze, 1, 0)?;
    let a = conv_bn_relu(&s, &w.br_a, 1, 0)?;
    let b = conv_bn_relu(&depthwise_bn_relu(&s, &w.br_b_dw, 1)?, &w.br_b_pw, 1, 0)?;
    let skip = conv_bn(x, &w.skip, 1, 0)?;
    let mut y = add(&concat_channels(&a, &b)?, &skip)?;
    relu_in_place(&mut y);
    Ok(y)
}

fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn array(bundle: &WeightBundle, name: &str) -> Vec<f64> {
    // Only called after validation.
    f64s(&bundle.get(name).expect("validated bundle").data)
}

fn conv_bn_from(bundle: &WeightBundle, prefix: &str) -> Result<ConvBn, CnnError> {
    let w = bundle.get(&format!("{prefix}.conv.w")).expect("validated bundle");
    let shape = [w.dims[0], w.dims[1], w.dims[2], w.dims[3]];
    Ok(ConvBn {
        kernel: Kernel::new(shape, f64s(&w.data))?,
        bias: array(bundle, &format!("{prefix}.conv.b")),
        bn: BatchNorm {
            gamma: array(bundle, &format!("{prefix}.bn.gamma")),
            beta: array(bundle, &format!("{prefix}.bn.beta")),
            mean: array(bundle, &format!("{prefix}.bn.mean")),
            var: array(bundle, &format!("{prefix}.bn.var")),
        },
    })
}

/// A validated bundle unpacked into `f64` layers, ready to score many
/// images.
#[derive(Debug, Clone, PartialEq)]
pub struct SlimCnn {
    pub stem: ConvBn,
    pub slims: Vec<SlimWeights>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: Vec<f64>,
}

impl SlimCnn {
    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self, CnnError> {
        ArchitectureSpec::validate(bundle)?;
        let mut slims = Vec::with_capacity(SLIM_CHANNELS.len());
        for k in 1..=SLIM_CHANNELS.len() {
            slims.push(SlimWeights {
                squeeze: conv_bn_from(bundle, &format!("slim{k}.squeeze"))?,
                br_a: conv_bn_from(bundle, &format!("slim{k}.brA"))?,
                br_b_dw: conv_bn_from(bundle, &format!("slim{k}.brB.dw"))?,
                br_b_pw: conv_bn_from(bundle, &format!("slim{k}.brB.pw"))?,
                skip: conv_bn_from(bundle, &format!("slim{k}.skip"))?,
            });
        }
        Ok(Self {
            stem: conv_bn_from(bundle, "stem")?,
            slims,
            fc1_w: array(bundle, "head.fc1.w"),
            fc1_b: array(bundle, "head.fc1.b"),
            fc2_w: array(bundle, "head.fc2.w"),
            fc2_b: array(bundle, "head.fc2.b"),
        })
    }

    /// Probability that `pixels` (20×500, values in [0, 1]) is a good segment.
    pub fn forward(&self, pixels: &Matrix) -> Result<f64, CnnError> {
        self.run(pixels, None)
    }

    /// Like [`SlimCnn::forward`], also returning the shape after each stage.
    pub fn forward_trace(&self, pixels: &Matrix) -> Result<(f64, Vec<StageShape>), CnnError> {
        let mut trace = Vec::new();
        let p = self.run(pixels, Some(&mut trace))?;
        Ok((p, trace))
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, pixels: &Matrix) -> Result<f64, CnnError> {
        check_input(pixels)?;
        let x = Tensor3::from_matrix(pixels);
        self.head(&self.body(&x, None)?, None)
    }

    fn run(&self, pixels: &Matrix, mut trace: Option<&mut Vec<StageShape>>) -> Result<f64, CnnError> {
        check_input(pixels)?;
        let x = Tensor3::from_matrix(pixels);
        if let Some(t) = trace.as_deref_mut() {
            t.push(StageShape { name: "input", shape: x.shape() });
        }
        let feat = self.body(&x, trace.as_deref_mut())?;
        Ok(sigmoid(self.head(&feat, trace)?))
    }

    fn body(&self, x: &Tensor3, mut trace: Option<&mut Vec<StageShape>>) -> Result<Tensor3, CnnError> {
        let mut log = |name, t: &Tensor3| {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(StageShape { name, shape: t.shape() });
            }
        };
        const SLIM_NAMES: [(&str, &str); 3] = [("pool1", "slim1"), ("pool2", "slim2"), ("pool3", "slim3")];
        let mut h = conv_bn_relu(x, &self.stem, 1, STEM_PAD)?;
        log("stem", &h);
        for (w, (pool, slim)) in self.slims.iter().zip(SLIM_NAMES) {
            h = maxpool2(&h);
            log(pool, &h);
            h = slim_module(&h, w)?;
            log(slim, &h);
        }
        Ok(h)
    }

    fn head(&self, feat: &Tensor3, mut trace: Option<&mut Vec<StageShape>>) -> Result<f64, CnnError> {
        let mut log = |name, n: usize| {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(StageShape { name, shape: [n, 1, 1] });
            }
        };
        let g = gap(feat);
        log("gap", g.len());
        // Dropout is the identity at inference.
        let hidden: Vec<f64> = dense(&g, &self.fc1_w, &self.fc1_b)?
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        log("fc1", hidden.len());
        let out = dense(&hidden, &self.fc2_w, &self.fc2_b)?;
        log("fc2", out.len());
        Ok(out[0])
    }
}

fn check_input(pixels: &Matrix) -> Result<(), CnnError> {
    let want = (INPUT_SHAPE[1], INPUT_SHAPE[2]);
    if pixels.shape() != want {
        return Err(CnnError::ShapeMismatch(format!(
            "input is {:?}, expected {want:?}",
            pixels.shape()
        )));
    }
    for r in 0..pixels.rows() {
        for (c, &v) in pixels.row(r).iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(CnnError::InputOutOfRange { row: r, col: c, value: v });
            }
        }
    }
    Ok(())
}

/// Validates `bundle` and scores one image.
pub fn forward(pixels: &Matrix, bundle: &WeightBundle) -> Result<f64, CnnError> {
    SlimCnn::from_bundle(bundle)?.forward(pixels)
}

pub fn forward_trace(pixels: &Matrix, bundle: &WeightBundle) -> Result<(f64, Vec<StageShape>), CnnError> {
    SlimCnn::from_bundle(bundle)?.forward_trace(pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(seed: u64) -> Matrix {
        let data = (0..20 * 500)
            .map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 999.0)
            .collect();
        Matrix::from_vec(20, 500, data)
    }

    #[test]
    fn shape_ledger() {
        let (_, trace) = forward_trace(&image(1), &WeightBundle::synthetic(42)).unwrap();
        assert_eq!(trace, ArchitectureSpec::stage_shapes());
        let shapes: Vec<[usize; 3]> = trace.iter().map(|s| s.shape).collect();
        assert_eq!(shapes[6], [72, 2, 62]);
        assert_eq!(shapes[7], [96, 2, 62]);
    }

    #[test]
    fn lightweight() {
        let n = ArchitectureSpec::param_count();
        assert!(n < 100_000, "{n}");
        assert_eq!(WeightBundle::synthetic(0).param_count(), n);
    }

    #[test]
    fn zero_weights_give_one_half() {
        assert_eq!(forward(&image(3), &WeightBundle::zeros()).unwrap(), 0.5);
    }

    #[test]
    fn output_in_open_interval() {
        let b = WeightBundle::synthetic(7);
        for s in 0..3 {
            let p = forward(&image(s), &b).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn validation_lists_every_offender() {
        let mut b = WeightBundle::synthetic(1);
        b.insert("stem.conv.w", vec![16, 1, 5, 5], vec![0.0; 400]);
        b.get_mut("slim2.skip.bn.var").unwrap().data[3] = 0.0;
        let mut pruned = WeightBundle::new();
        for a in b.arrays().iter().filter(|a| a.name != "head.fc2.b") {
            pruned.insert(a.name.clone(), a.dims.clone(), a.data.clone());
        }
        let err = ArchitectureSpec::validate(&pruned).unwrap_err();
        let names: Vec<&str> = err.offenders.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["stem.conv.w", "slim2.skip.bn.var", "head.fc2.b"]);
        assert!(matches!(forward(&image(0), &pruned), Err(CnnError::BundleShape(_))));
    }

    #[test]
    fn input_checks() {
        let b = WeightBundle::synthetic(1);
        assert!(matches!(
            forward(&Matrix::zeros(20, 499), &b),
            Err(CnnError::ShapeMismatch(_))
        ));
        let mut img = image(0);
        img[(4, 9)] = 1.5;
        assert!(matches!(
            forward(&img, &b),
            Err(CnnError::InputOutOfRange { row: 4, col: 9, .. })
        ));
    }

    #[test]
    fn zero_input_slim_module_sees_only_offsets() {
        let b = WeightBundle::synthetic(5);
        let net = SlimCnn::from_bundle(&b).unwrap();
        let y = slim_module(&Tensor3::zeros(16, 4, 6), &net.slims[0]).unwrap();
        assert_eq!(y.shape(), [48, 4, 6]);
        // Spatially constant input gives a spatially constant interior.
        for c in 0..48 {
            assert_eq!(y.get(c, 1, 1), y.get(c, 2, 3));
            assert!(y.get(c, 0, 0) >= 0.0);
        }
    }
}

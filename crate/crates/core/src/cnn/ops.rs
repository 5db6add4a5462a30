//! Inference primitives. Every op allocates its output and leaves the
//! input untouched.

use super::{BatchNorm, CnnError, ConvBn, Kernel, Tensor3};

pub const BN_EPS: f64 = 1e-5;

fn mismatch(msg: String) -> CnnError {
    CnnError::ShapeMismatch(msg)
}

/// Output indices `o` in `0..n_out` for which `o*stride + k - pad` lands
/// inside `0..n_in`.
fn valid_range(n_in: usize, n_out: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k).div_ceil(stride);
    let hi = if n_in + pad > k {
        ((n_in + pad - k - 1) / stride + 1).min(n_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

fn out_dim(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize, CnnError> {
    if stride == 0 {
        return Err(mismatch("stride must be positive".into()));
    }
    if n + 2 * pad < k {
        return Err(mismatch(format!("kernel {k} larger than padded input {}", n + 2 * pad)));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

/// Cross-correlation with zero padding; `k` is `[out, in, kh, kw]`.
pub fn conv2d(
    x: &Tensor3,
    k: &Kernel,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Result<Tensor3, CnnError> {
    if k.in_ch != x.channels() {
        return Err(mismatch(format!(
            "kernel expects {} input channels, tensor has {}",
            k.in_ch,
            x.channels()
        )));
    }
    if bias.len() != k.out_ch {
        return Err(mismatch(format!("bias has {} entries for {} filters", bias.len(), k.out_ch)));
    }
    let (h, w) = (x.height(), x.width());
    let oh = out_dim(h, k.kh, stride, pad)?;
    let ow = out_dim(w, k.kw, stride, pad)?;
    let mut out = Tensor3::zeros(k.out_ch, oh, ow);
    for o in 0..k.out_ch {
        let dst = out.channel_mut(o);
        dst.fill(bias[o]);
        for i in 0..k.in_ch {
            let src = x.channel(i);
            for ky in 0..k.kh {
                let (y0, y1) = valid_range(h, oh, ky, stride, pad);
                for kx in 0..k.kw {
                    let wv = k.get(o, i, ky, kx);
                    if wv == 0.0 {
                        continue;
                    }
                    let (x0, x1) = valid_range(w, ow, kx, stride, pad);
                    for oy in y0..y1 {
                        let iy = oy * stride + ky - pad;
                        let row = &src[iy * w..(iy + 1) * w];
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let ix0 = x0 + kx - pad;
                            for (d, s) in drow[x0..x1].iter_mut().zip(&row[ix0..]) {
                                *d += wv * s;
                            }
                        } else {
                            for ox in x0..x1 {
                                drow[ox] += wv * row[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One `kh × kw` kernel per channel (`k` is `[C, 1, kh, kw]`), stride 1.
pub fn depthwise_conv2d(
    x: &Tensor3,
    k: &Kernel,
    bias: &[f64],
    pad: usize,
) -> Result<Tensor3, CnnError> {
    let c = x.channels();
    if k.out_ch != c || k.in_ch != 1 {
        return Err(mismatch(format!(
            "depthwise kernel {:?} does not fit {c} channels",
            k.shape()
        )));
    }
    if bias.len() != c {
        return Err(mismatch(format!("bias has {} entries for {c} channels", bias.len())));
    }
    let oh = out_dim(x.height(), k.kh, 1, pad)?;
    let ow = out_dim(x.width(), k.kw, 1, pad)?;
    let mut out = Tensor3::zeros(c, oh, ow);
    let taps = k.kh * k.kw;
    for ch in 0..c {
        let single = Tensor3::new(1, x.height(), x.width(), x.channel(ch).to_vec())?;
        let kc = Kernel::new([1, 1, k.kh, k.kw], k.data[ch * taps..(ch + 1) * taps].to_vec())?;
        let y = conv2d(&single, &kc, &bias[ch..=ch], 1, pad)?;
        out.channel_mut(ch).copy_from_slice(y.data());
    }
    Ok(out)
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta` per channel.
pub fn batchnorm_infer(x: &Tensor3, bn: &BatchNorm) -> Result<Tensor3, CnnError> {
    batchnorm_infer_eps(x, bn, BN_EPS)
}

pub fn batchnorm_infer_eps(x: &Tensor3, bn: &BatchNorm, eps: f64) -> Result<Tensor3, CnnError> {
    let c = x.channels();
    for (name, v) in [("gamma", &bn.gamma), ("beta", &bn.beta), ("mean", &bn.mean), ("var", &bn.var)] {
        if v.len() != c {
            return Err(mismatch(format!("batch-norm {name} has {} entries for {c} channels", v.len())));
        }
    }
    if let Some((channel, &value)) = bn.var.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(CnnError::NonPositiveVar { channel, value });
    }
    let mut out = x.clone();
    for ch in 0..c {
        let scale = bn.gamma[ch] / (bn.var[ch] + eps).sqrt();
        let (mu, beta) = (bn.mean[ch], bn.beta[ch]);
        out.channel_mut(ch)
            .iter_mut()
            .for_each(|v| *v = scale * (*v - mu) + beta);
    }
    Ok(out)
}

pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(x: &mut Tensor3) {
    let c = x.channels();
    for ch in 0..c {
        x.channel_mut(ch).iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

/// 2×2 max pool, stride 2; a trailing odd row or column is dropped.
pub fn maxpool2(x: &Tensor3) -> Tensor3 {
    let (oh, ow) = (x.height() / 2, x.width() / 2);
    let mut out = Tensor3::zeros(x.channels(), oh, ow);
    for c in 0..x.channels() {
        for oy in 0..oh {
            for ox in 0..ow {
                let (y, xx) = (2 * oy, 2 * ox);
                let m = x
                    .get(c, y, xx)
                    .max(x.get(c, y, xx + 1))
                    .max(x.get(c, y + 1, xx))
                    .max(x.get(c, y + 1, xx + 1));
                out.set(c, oy, ox, m);
            }
        }
    }
    out
}

/// Global average pool: one mean per channel.
pub fn gap(x: &Tensor3) -> Vec<f64> {
    let n = (x.height() * x.width()) as f64;
    (0..x.channels())
        .map(|c| x.channel(c).iter().sum::<f64>() / n)
        .collect()
}

/// `w` is row-major `[out, in]`.
pub fn dense(x: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>, CnnError> {
    let n_out = b.len();
    if w.len() != n_out * x.len() {
        return Err(mismatch(format!(
            "dense weights have {} entries for {}x{}",
            w.len(),
            n_out,
            x.len()
        )));
    }
    Ok(w.chunks_exact(x.len().max(1))
        .take(n_out)
        .zip(b)
        .map(|(row, bi)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bi)
        .collect())
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn add(a: &Tensor3, b: &Tensor3) -> Result<Tensor3, CnnError> {
    if a.shape() != b.shape() {
        return Err(mismatch(format!("cannot add {:?} and {:?}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor3::new(a.channels(), a.height(), a.width(), data)
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels(a: &Tensor3, b: &Tensor3) -> Result<Tensor3, CnnError> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(mismatch(format!("cannot concat {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Tensor3::new(a.channels() + b.channels(), a.height(), a.width(), data)
}

/// Dense convolution then batch norm, no activation.
pub fn conv_bn(x: &Tensor3, p: &ConvBn, stride: usize, pad: usize) -> Result<Tensor3, CnnError> {
    batchnorm_infer(&conv2d(x, &p.kernel, &p.bias, stride, pad)?, &p.bn)
}

pub fn conv_bn_relu(x: &Tensor3, p: &ConvBn, stride: usize, pad: usize) -> Result<Tensor3, CnnError> {
    let mut y = conv_bn(x, p, stride, pad)?;
    relu_in_place(&mut y);
    Ok(y)
}

/// Depthwise convolution, batch norm, ReLU.
pub fn depthwise_bn_relu(x: &Tensor3, p: &ConvBn, pad: usize) -> Result<Tensor3, CnnError> {
    let mut y = batchnorm_infer(&depthwise_conv2d(x, &p.kernel, &p.bias, pad)?, &p.bn)?;
    relu_in_place(&mut y);
    Ok(y)
}

//! Reference implementations used as test oracles. Each one is the
//! slowest obvious way to compute the quantity and shares no code with the
//! library.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense `-h² D₂ - diag(y)` with the three-point stencil and zero boundary
/// values, built entry by entry.
pub fn dense_operator(y: &[f64], h: f64, dt: f64) -> Vec<Vec<f64>> {
    let n = y.len();
    let k = h * h / (dt * dt);
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 2.0 * k - y[i];
        if i > 0 {
            m[i][i - 1] = -k;
        }
        if i + 1 < n {
            m[i][i + 1] = -k;
        }
    }
    m
}

/// `[out, in, kh, kw]` kernel cross-correlation, zero padding.
pub fn conv_loops(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    k: &[f64],
    (o, kh, kw): (usize, usize, usize),
    b: &[f64],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; o * oh * ow];
    for oc in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[oc];
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += k[((oc * c + ic) * kh + ky) * kw + kx]
                                * x[(ic * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    (out, oh, ow)
}

pub fn depthwise_loops(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    k: &[f64],
    kk: usize,
    b: &[f64],
    pad: usize,
) -> Vec<f64> {
    let oh = h + 2 * pad - kk + 1;
    let ow = w + 2 * pad - kk + 1;
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[ch];
                for ky in 0..kk {
                    for kx in 0..kk {
                        let iy = (oy + ky) as isize - pad as isize;
                        let ix = (ox + kx) as isize - pad as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            acc += k[(ch * kk + ky) * kk + kx] * x[(ch * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(ch * oh + oy) * ow + ox] = acc;
            }
        }
    }
    out
}

pub fn maxpool_loops(x: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x[(ch * h + 2 * oy + dy) * w + 2 * ox + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

/// Probability that a random positive outranks a random negative, ties
/// counted as one half, by comparing every pair.
pub fn mann_whitney_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !truth[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// `|X[k]|` for `k = 0..=n/2` by the defining sum.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Smooth periodic pulse train on `[0, 1]`, 500 samples at 100 Hz.
pub fn pulse_train(bpm: f64, phase: f64) -> Vec<f64> {
    let period = 60.0 / bpm;
    let raw: Vec<f64> = (0..500)
        .map(|i| {
            let t = (i as f64 / 100.0 + phase) % period / period;
            (-0.5 * ((t - 0.25) / 0.08).powi(2)).exp() + 0.3 * (-0.5 * ((t - 0.55) / 0.1).powi(2)).exp()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Per-channel `gamma * (x - mean) / sqrt(var + 1e-5) + beta`.
pub fn batchnorm_loops(x: &mut [f64], c: usize, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64]) {
    let n = x.len() / c;
    for ch in 0..c {
        for v in &mut x[ch * n..(ch + 1) * n] {
            *v = gamma[ch] * (*v - mean[ch]) / (var[ch] + 1e-5).sqrt() + beta[ch];
        }
    }
}

/// The whole slim network written out stage by stage from the loop
/// primitives above, reading arrays straight out of the bundle by name.
pub fn slim_cnn_oracle(bundle: &ppg_qpr::cnn::WeightBundle, pixels: &[f64]) -> f64 {
    let get = |name: &str| -> (Vec<usize>, Vec<f64>) {
        let a = bundle.get(name).unwrap_or_else(|| panic!("missing {name}"));
        (a.dims.clone(), a.data.iter().map(|&v| v as f64).collect())
    };
    // conv + bn (+ relu) on a (c, h, w) tensor.
    let conv_bn = |x: &[f64], shape: (usize, usize, usize), prefix: &str, relu: bool, depthwise: bool| {
        let (dims, k) = get(&format!("{prefix}.conv.w"));
        let (_, b) = get(&format!("{prefix}.conv.b"));
        let pad = dims[2] / 2;
        let (mut y, oc) = if depthwise {
            (depthwise_loops(x, shape, &k, dims[2], &b, pad), shape.0)
        } else {
            (conv_loops(x, shape, &k, (dims[0], dims[2], dims[3]), &b, 1, pad).0, dims[0])
        };
        let p = |s: &str| get(&format!("{prefix}.bn.{s}")).1;
        batchnorm_loops(&mut y, oc, &p("gamma"), &p("beta"), &p("mean"), &p("var"));
        if relu {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        (y, oc)
    };

    let (mut h, mut w) = (20, 500);
    let (mut x, mut c) = conv_bn(pixels, (1, h, w), "stem", true, false);
    for k in 1..=3 {
        x = maxpool_loops(&x, (c, h, w));
        h /= 2;
        w /= 2;
        let p = |s: &str| format!("slim{k}.{s}");
        let (s, cs) = conv_bn(&x, (c, h, w), &p("squeeze"), true, false);
        let (a, _) = conv_bn(&s, (cs, h, w), &p("brA"), true, false);
        let (d, _) = conv_bn(&s, (cs, h, w), &p("brB.dw"), true, true);
        let (b, _) = conv_bn(&d, (cs, h, w), &p("brB.pw"), true, false);
        let (skip, co) = conv_bn(&x, (c, h, w), &p("skip"), false, false);
        let cat: Vec<f64> = a.iter().chain(&b).copied().collect();
        x = cat.iter().zip(&skip).map(|(u, v)| (u + v).max(0.0)).collect();
        c = co;
    }
    let n = h * w;
    let g: Vec<f64> = (0..c).map(|ch| x[ch * n..(ch + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let dense = |x: &[f64], wname: &str, bname: &str| -> Vec<f64> {
        let (dims, wv) = get(wname);
        let (_, b) = get(bname);
        (0..dims[0])
            .map(|o| b[o] + (0..dims[1]).map(|i| wv[o * dims[1] + i] * x[i]).sum::<f64>())
            .collect()
    };
    let hid: Vec<f64> = dense(&g, "head.fc1.w", "head.fc1.b").into_iter().map(|v| v.max(0.0)).collect();
    let z = dense(&hid, "head.fc2.w", "head.fc2.b")[0];
    1.0 / (1.0 + (-z).exp())
}

mod common;

use common::{batchnorm_loops, conv_loops, depthwise_loops, maxpool_loops, random_vec, rng, slim_cnn_oracle};
use ppg_qpr::cnn::{
    self, ops, ArchitectureSpec, BatchNorm, CnnError, ConvBn, Kernel, SlimWeights, Tensor3, WeightBundle,
};
use ppg_qpr::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
    }
}

fn random_conv_bn(r: &mut ChaCha8Rng, o: usize, i: usize, k: usize) -> ConvBn {
    ConvBn {
        kernel: Kernel::new([o, i, k, k], random_vec(r, o * i * k * k, -0.5, 0.5)).unwrap(),
        bias: random_vec(r, o, -0.1, 0.1),
        bn: BatchNorm {
            gamma: random_vec(r, o, 0.8, 1.2),
            beta: random_vec(r, o, -0.1, 0.1),
            mean: random_vec(r, o, -0.1, 0.1),
            var: random_vec(r, o, 0.5, 1.5),
        },
    }
}

fn random_image(r: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(20, 500, random_vec(r, 20 * 500, 0.0, 1.0))
}

#[test]
fn conv_matches_loops() {
    let mut r = rng(1);
    for case in 0..20 {
        let (c, h, w) = (r.random_range(1..4), r.random_range(5..12), r.random_range(5..12));
        let (o, k) = (r.random_range(1..5), [1, 3, 5][case % 3]);
        let stride = 1 + case % 2;
        let pad = r.random_range(0..=k / 2);
        let x = random_vec(&mut r, c * h * w, -1.0, 1.0);
        let kv = random_vec(&mut r, o * c * k * k, -1.0, 1.0);
        let b = random_vec(&mut r, o, -1.0, 1.0);
        let got = ops::conv2d(
            &Tensor3::new(c, h, w, x.clone()).unwrap(),
            &Kernel::new([o, c, k, k], kv.clone()).unwrap(),
            &b,
            stride,
            pad,
        )
        .unwrap();
        let (want, oh, ow) = conv_loops(&x, (c, h, w), &kv, (o, k, k), &b, stride, pad);
        assert_eq!(got.shape(), [o, oh, ow]);
        close(got.data(), &want, 1e-12);
    }
}

#[test]
fn depthwise_matches_loops() {
    let mut r = rng(2);
    for _ in 0..20 {
        let (c, h, w) = (r.random_range(1..6), r.random_range(3..10), r.random_range(3..10));
        let x = random_vec(&mut r, c * h * w, -1.0, 1.0);
        let kv = random_vec(&mut r, c * 9, -1.0, 1.0);
        let b = random_vec(&mut r, c, -1.0, 1.0);
        let got = ops::depthwise_conv2d(
            &Tensor3::new(c, h, w, x.clone()).unwrap(),
            &Kernel::new([c, 1, 3, 3], kv.clone()).unwrap(),
            &b,
            1,
        )
        .unwrap();
        close(got.data(), &depthwise_loops(&x, (c, h, w), &kv, 3, &b, 1), 1e-12);
    }
}

#[test]
fn batchnorm_pool_gap_dense() {
    let mut r = rng(3);
    for _ in 0..20 {
        let (c, h, w) = (r.random_range(1..5), r.random_range(2..9), r.random_range(2..9));
        let x = random_vec(&mut r, c * h * w, -2.0, 2.0);
        let t = Tensor3::new(c, h, w, x.clone()).unwrap();
        let bn = BatchNorm {
            gamma: random_vec(&mut r, c, 0.5, 1.5),
            beta: random_vec(&mut r, c, -1.0, 1.0),
            mean: random_vec(&mut r, c, -1.0, 1.0),
            var: random_vec(&mut r, c, 0.1, 2.0),
        };
        let mut want = x.clone();
        batchnorm_loops(&mut want, c, &bn.gamma, &bn.beta, &bn.mean, &bn.var);
        close(ops::batchnorm_infer(&t, &bn).unwrap().data(), &want, 1e-12);

        close(ops::maxpool2(&t).data(), &maxpool_loops(&x, (c, h, w)), 0.0);

        let n = h * w;
        let g: Vec<f64> = (0..c).map(|k| x[k * n..(k + 1) * n].iter().sum::<f64>() / n as f64).collect();
        close(&ops::gap(&t), &g, 1e-12);

        let o = r.random_range(1..6);
        let wv = random_vec(&mut r, o * c, -1.0, 1.0);
        let b = random_vec(&mut r, o, -1.0, 1.0);
        let want: Vec<f64> = (0..o)
            .map(|i| b[i] + (0..c).map(|j| wv[i * c + j] * g[j]).sum::<f64>())
            .collect();
        close(&ops::dense(&g, &wv, &b).unwrap(), &want, 1e-12);
    }
}

#[test]
fn non_positive_variance_is_rejected() {
    let t = Tensor3::zeros(2, 2, 2);
    let mut bn = BatchNorm::identity(2);
    bn.var[1] = -1.0;
    assert!(matches!(
        ops::batchnorm_infer(&t, &bn),
        Err(CnnError::NonPositiveVar { channel: 1, .. })
    ));
}

fn random_slim(r: &mut ChaCha8Rng, cin: usize, cs: usize, ce: usize) -> SlimWeights {
    SlimWeights {
        squeeze: random_conv_bn(r, cs, cin, 1),
        br_a: random_conv_bn(r, ce, cs, 1),
        br_b_dw: {
            let mut p = random_conv_bn(r, cs, 1, 3);
            p.kernel = Kernel::new([cs, 1, 3, 3], random_vec(r, cs * 9, -0.5, 0.5)).unwrap();
            p
        },
        br_b_pw: random_conv_bn(r, ce, cs, 1),
        skip: random_conv_bn(r, 2 * ce, cin, 1),
    }
}

#[test]
fn slim_module_is_its_composition() {
    let mut r = rng(4);
    let (cin, cs, ce, h, w) = (5, 3, 4, 6, 9);
    let x = Tensor3::new(cin, h, w, random_vec(&mut r, cin * h * w, -1.0, 1.0)).unwrap();
    let sw = random_slim(&mut r, cin, cs, ce);

    let step = |x: &Tensor3, p: &ConvBn| {
        ops::relu(&ops::batchnorm_infer(&ops::conv2d(x, &p.kernel, &p.bias, 1, 0).unwrap(), &p.bn).unwrap())
    };
    let s = step(&x, &sw.squeeze);
    let a = step(&s, &sw.br_a);
    let d = ops::relu(
        &ops::batchnorm_infer(&ops::depthwise_conv2d(&s, &sw.br_b_dw.kernel, &sw.br_b_dw.bias, 1).unwrap(), &sw.br_b_dw.bn)
            .unwrap(),
    );
    let b = step(&d, &sw.br_b_pw);
    let skip = ops::batchnorm_infer(&ops::conv2d(&x, &sw.skip.kernel, &sw.skip.bias, 1, 0).unwrap(), &sw.skip.bn).unwrap();
    let want = ops::relu(&ops::add(&ops::concat_channels(&a, &b).unwrap(), &skip).unwrap());

    let got = cnn::slim_module(&x, &sw).unwrap();
    assert_eq!(got.shape(), [2 * ce, h, w]);
    close(got.data(), want.data(), 1e-12);
}

#[test]
fn zeroing_branch_b_leaves_branch_a_and_skip() {
    let mut r = rng(5);
    let (cin, cs, ce, h, w) = (4, 2, 3, 5, 7);
    let x = Tensor3::new(cin, h, w, random_vec(&mut r, cin * h * w, -1.0, 1.0)).unwrap();
    let mut sw = random_slim(&mut r, cin, cs, ce);
    sw.br_b_pw.kernel.data.fill(0.0);
    sw.br_b_pw.bias.fill(0.0);
    sw.br_b_pw.bn = BatchNorm {
        gamma: vec![1.0; ce],
        beta: vec![0.0; ce],
        mean: vec![0.0; ce],
        var: vec![1.0; ce],
    };
    let y = cnn::slim_module(&x, &sw).unwrap();
    let skip = ops::conv_bn(&x, &sw.skip, 1, 0).unwrap();
    // Channels of branch B are relu(0 + skip).
    let n = h * w;
    for ch in ce..2 * ce {
        let want: Vec<f64> = skip.channel(ch).iter().map(|v| v.max(0.0)).collect();
        close(&y.data()[ch * n..(ch + 1) * n], &want, 0.0);
    }
}

#[test]
fn conv_is_linear() {
    let mut r = rng(6);
    let k = Kernel::new([3, 2, 3, 3], random_vec(&mut r, 54, -1.0, 1.0)).unwrap();
    let zero_b = vec![0.0; 3];
    for _ in 0..10 {
        let a = random_vec(&mut r, 2 * 6 * 6, -1.0, 1.0);
        let b = random_vec(&mut r, 2 * 6 * 6, -1.0, 1.0);
        let (al, be) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| al * x + be * y).collect();
        let f = |v: Vec<f64>| ops::conv2d(&Tensor3::new(2, 6, 6, v).unwrap(), &k, &zero_b, 1, 1).unwrap();
        let (fa, fb, fm) = (f(a), f(b), f(mix));
        let want: Vec<f64> = fa.data().iter().zip(fb.data()).map(|(x, y)| al * x + be * y).collect();
        close(fm.data(), &want, 1e-12);
    }
}

#[test]
fn forward_matches_loop_oracle() {
    let mut r = rng(7);
    for seed in 0..3 {
        let bundle = WeightBundle::synthetic(seed);
        let img = random_image(&mut r);
        let got = cnn::forward(&img, &bundle).unwrap();
        let want = slim_cnn_oracle(&bundle, img.as_slice());
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
        assert!(got > 0.0 && got < 1.0);
    }
}

#[test]
fn shape_ledger_and_size() {
    let (_, trace) = cnn::forward_trace(&Matrix::zeros(20, 500), &WeightBundle::synthetic(1)).unwrap();
    let shapes: Vec<(&str, [usize; 3])> = trace.iter().map(|s| (s.name, s.shape)).collect();
    assert_eq!(
        shapes,
        vec![
            ("input", [1, 20, 500]),
            ("stem", [16, 20, 500]),
            ("pool1", [16, 10, 250]),
            ("slim1", [48, 10, 250]),
            ("pool2", [48, 5, 125]),
            ("slim2", [72, 5, 125]),
            ("pool3", [72, 2, 62]),
            ("slim3", [96, 2, 62]),
            ("gap", [96, 1, 1]),
            ("fc1", [64, 1, 1]),
            ("fc2", [1, 1, 1]),
        ]
    );
    assert!(ArchitectureSpec::param_count() < 100_000);
    assert_eq!(WeightBundle::synthetic(1).param_count(), ArchitectureSpec::param_count());
}

#[test]
fn bundle_bytes_round_trip_and_rejections() {
    let b = WeightBundle::synthetic(9);
    let bytes = cnn::write_bundle(&b).unwrap();
    let back = cnn::read_bundle(&bytes).unwrap();
    assert_eq!(cnn::write_bundle(&back).unwrap(), bytes);

    let cut = &bytes[..bytes.len() - 10];
    assert!(matches!(cnn::read_bundle(cut), Err(CnnError::TruncatedFile { array: Some(_) })));

    // Grow the first dim of the first array: the payload no longer fits.
    let mut bad = bytes.clone();
    let name_len = u16::from_le_bytes([bad[12], bad[13]]) as usize;
    let dim0 = 14 + name_len + 2;
    bad[dim0] = bad[dim0].wrapping_add(1);
    assert!(cnn::read_bundle(&bad).is_err());

    let mut wrong = b.clone();
    wrong.get_mut("slim2.brA.conv.w").unwrap().dims = vec![24, 24, 1, 1];
    wrong.get_mut("slim2.brA.conv.w").unwrap().data = vec![0.0; 576];
    match cnn::forward(&Matrix::zeros(20, 500), &wrong) {
        Err(CnnError::BundleShape(e)) => assert_eq!(e.offenders[0].name, "slim2.brA.conv.w"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bundle_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.qprw");
    let b = WeightBundle::synthetic(3);
    cnn::save_weights(&b, &path).unwrap();
    let img = random_image(&mut rng(8));
    let back = cnn::load_weights(&path).unwrap();
    assert_eq!(cnn::forward(&img, &b).unwrap().to_bits(), cnn::forward(&img, &back).unwrap().to_bits());
}

mod common;

use common::{dft_magnitudes, pulse_train, random_vec, rng};
use ppg_qpr::qpr::{self, QprError, SweepConfig};
use ppg_qpr::synth::{self, SynthConfig};
use ppg_qpr::{ingest, Matrix, Signal};
use rand::Rng;

fn default_cfg() -> SweepConfig {
    SweepConfig::new(0.5, 12.0, 20).unwrap()
}

#[test]
fn reconstruction_error_small_cases() {
    assert_eq!(qpr::reconstruction_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    let e = qpr::reconstruction_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((e - 2f64.sqrt()).abs() < 1e-15);
    assert!(matches!(
        qpr::reconstruction_error(&[1.0], &[1.0, 2.0]),
        Err(QprError::LengthMismatch { .. })
    ));
}

#[test]
fn reconstruction_error_matches_sum_of_squares() {
    let mut r = rng(3);
    for _ in 0..20 {
        let a = random_vec(&mut r, 500, -2.0, 2.0);
        let b = random_vec(&mut r, 500, -2.0, 2.0);
        let want = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let got = qpr::reconstruction_error(&a, &b).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn sweep_grid() {
    let cfg = default_cfg();
    assert_eq!(cfg.n_points, 10);
    let om = cfg.omegas();
    assert_eq!(om.first(), Some(&0.5));
    assert_eq!(om.last(), Some(&12.0));
    assert!(SweepConfig::new(2.0, 1.0, 20).is_err());
    assert!(SweepConfig::new(0.5, 12.0, 1).is_err());
}

#[test]
fn zero_signal_has_no_candidate() {
    let s = Signal::new(vec![0.0; 500], 100.0).unwrap();
    assert_eq!(
        qpr::quantum_pattern_recognition(&s, &default_cfg(), "z").unwrap_err(),
        QprError::NoValidCandidate { n_h: 20 }
    );
}

#[test]
fn pulse_train_image() {
    let s = Signal::new(pulse_train(75.0, 0.31), 100.0).unwrap();
    let img = qpr::quantum_pattern_recognition(&s, &default_cfg(), "p").unwrap();
    assert_eq!(img.pixels.shape(), (20, 500));
    assert_eq!(img.pixels.max(), 1.0);
    assert!(img.pixels.min() >= 0.0);
    let row_sum = |r: usize| img.pixels.row(r).iter().sum::<f64>();
    assert!(row_sum(0) >= row_sum(19));
    let best = img
        .sweep
        .iter()
        .filter_map(|c| c.error)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(img.recon_error, best);
    let h = img.sweep.iter().find(|c| c.error == Some(best)).unwrap().h;
    assert_eq!(img.h_selected, h);
}

#[test]
fn synthetic_segments_are_deterministic() {
    let cfg = SynthConfig {
        n_good: 3,
        n_bad: 3,
        seed: 5,
        ..SynthConfig::default()
    };
    for rec in synth::generate(&cfg).unwrap() {
        let s = ingest::normalize_amplitude(&rec.samples, rec.fs).unwrap();
        let a = qpr::quantum_pattern_recognition(&s, &default_cfg(), &rec.segment_id).unwrap();
        let b = qpr::quantum_pattern_recognition(&s, &default_cfg(), &rec.segment_id).unwrap();
        assert_eq!(a, b);
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.pixels), bits(&b.pixels));
    }
}

#[test]
fn grayscale_matches_rounding_oracle() {
    let mut r = rng(9);
    let data: Vec<f64> = (0..200).map(|_| r.random_range(0.0..=1.0)).collect();
    let m = Matrix::from_vec(10, 20, data.clone());
    let gray = qpr::to_grayscale(&m).unwrap();
    for (g, v) in gray.iter().zip(&data) {
        // Half away from zero, done with integer arithmetic on the scaled value.
        let scaled = v * 255.0;
        let fl = scaled.floor();
        let want = if scaled - fl >= 0.5 { fl + 1.0 } else { fl };
        assert_eq!(*g as f64, want);
    }
    let edge = Matrix::from_vec(1, 3, vec![0.0, 0.5, 1.0]);
    assert_eq!(qpr::to_grayscale(&edge).unwrap(), vec![0, 128, 255]);
    let bad = Matrix::from_vec(1, 2, vec![0.2, 1.01]);
    assert!(matches!(
        qpr::to_grayscale(&bad),
        Err(QprError::OutOfRange { row: 0, col: 1, .. })
    ));
}

#[test]
fn stft_chirp_matches_naive_dft() {
    let fs = 100.0;
    let x: Vec<f64> = (0..500)
        .map(|i| {
            let t = i as f64 / fs;
            (2.0 * std::f64::consts::PI * (2.0 * t + 1.5 * t * t)).sin()
        })
        .collect();
    let (win, hop) = (64, 8);
    let img = qpr::stft_image(&Signal::new(x.clone(), fs).unwrap(), win, hop).unwrap();
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
        .collect();
    let frames: Vec<Vec<f64>> = (0..img.cols())
        .map(|f| {
            let seg: Vec<f64> = (0..win).map(|i| x[f * hop + i] * hann[i]).collect();
            dft_magnitudes(&seg)
        })
        .collect();
    let peak = frames.iter().flatten().copied().fold(0.0, f64::max);
    for (f, mags) in frames.iter().enumerate() {
        for (k, m) in mags.iter().enumerate() {
            assert!((img[(k, f)] - m / peak).abs() <= 1e-9);
        }
    }
}

#[test]
fn qpri_and_pgm_formats() {
    let m = Matrix::from_vec(2, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.1]);
    let mut buf = Vec::new();
    qpr::write_qpri(&mut buf, &m).unwrap();
    assert_eq!(&buf[..4], b"QPRI");
    assert_eq!(&buf[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
    assert_eq!(buf.len(), 16 + 6 * 4);
    assert_eq!(&buf[16 + 4..16 + 8], &0.25f32.to_le_bytes());
    let back = qpr::read_qpri(&buf[..]).unwrap();
    for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }

    let gray = qpr::to_grayscale(&m).unwrap();
    let mut pgm = Vec::new();
    qpr::write_pgm(&mut pgm, 2, 3, &gray).unwrap();
    assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
    assert_eq!(&pgm[11..], &gray[..]);
}

//! Synthetic segments -> QPR images -> slim-CNN -> metrics, in process.
//!
//! Without trained weights the scores are from a seeded random bundle, so
//! the accuracy printed here says nothing about the method; it exercises
//! the plumbing. Pass a `.qprw` path to score with real weights.

use ppg_qpr::cnn::{self, SlimCnn, WeightBundle};
use ppg_qpr::ingest::{self, Label};
use ppg_qpr::metrics;
use ppg_qpr::qpr::{self, SweepConfig};
use ppg_qpr::synth::{self, SynthConfig};
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = match std::env::args().nth(1) {
        Some(p) => cnn::load_weights(p.as_ref())?,
        None => WeightBundle::synthetic(1),
    };
    let net = SlimCnn::from_bundle(&bundle)?;
    let cfg = SynthConfig { n_good: 20, n_bad: 20, seed: 77, ..SynthConfig::default() };
    let recs = synth::generate(&cfg)?;

    let scored: Vec<(f64, bool)> = recs
        .par_iter()
        .map(|r| -> Result<(f64, bool), Box<dyn std::error::Error + Send + Sync>> {
            let s = ingest::normalize_amplitude(&r.samples, r.fs)?;
            let img = qpr::quantum_pattern_recognition(&s, &SweepConfig::default(), &r.segment_id)?;
            Ok((net.forward(&img.pixels)?, r.label == Label::Good))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;

    let (scores, truth): (Vec<f64>, Vec<bool>) = scored.into_iter().unzip();
    let preds: Vec<bool> = scores.iter().map(|&p| p >= 0.5).collect();
    let c = metrics::confusion(&preds, &truth)?;
    println!("{c:?}");
    println!("{:?}", c.partial_summary());
    println!("auc {:.3}", metrics::roc_auc(&scores, &truth)?.auc);
    Ok(())
}

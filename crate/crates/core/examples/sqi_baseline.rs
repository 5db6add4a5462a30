//! Train the skewness/kurtosis/perfusion logistic baseline on synthetic
//! data and report held-out accuracy.

use ppg_qpr::ingest::{self, Label, SplitMode};
use ppg_qpr::sqi::{self, TrainOptions};
use ppg_qpr::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig { n_good: 200, n_bad: 200, seed: 1, ..SynthConfig::default() };
    let recs = synth::generate(&cfg)?;
    let feats = recs
        .iter()
        .map(|r| sqi::sqi_features(&r.segment_id, &r.samples).map(|f| f.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let (train, test) = ingest::split_pool(&recs, 0.8, 2, SplitMode::Random)?;

    let xs = |idx: &[usize]| idx.iter().map(|&i| feats[i].clone()).collect::<Vec<_>>();
    let ys = |idx: &[usize]| idx.iter().map(|&i| recs[i].label == Label::Good).collect::<Vec<_>>();
    let (model, report) = sqi::train_linear_baseline(&xs(&train), &ys(&train), &TrainOptions::default())?;
    println!(
        "trained {} epochs, loss {:.4} -> {:.4}",
        report.losses.len(),
        report.losses[0],
        report.losses.last().unwrap()
    );
    println!("weights {:?}, bias {:.3}", model.weights, model.bias);

    let correct = xs(&test)
        .iter()
        .zip(ys(&test))
        .filter(|(x, y)| (sqi::predict_linear(&model, x) >= 0.5) == *y)
        .count();
    println!("test accuracy {correct}/{}", test.len());
    Ok(())
}

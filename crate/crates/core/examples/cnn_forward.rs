//! Run the slim-CNN on one QPR image with a seeded stand-in weight bundle,
//! printing the shape after each stage.
//!
//! Pass a `.qprw` path to use trained weights instead.

use ppg_qpr::cnn::{self, ArchitectureSpec, SlimCnn, WeightBundle};
use ppg_qpr::ingest;
use ppg_qpr::qpr::{self, SweepConfig};
use ppg_qpr::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = match std::env::args().nth(1) {
        Some(p) => cnn::load_weights(p.as_ref())?,
        None => WeightBundle::synthetic(0),
    };
    println!("{} arrays, {} parameters", bundle.len(), ArchitectureSpec::param_count());
    let net = SlimCnn::from_bundle(&bundle)?;

    let cfg = SynthConfig { n_good: 1, n_bad: 1, seed: 9, ..SynthConfig::default() };
    for rec in synth::generate(&cfg)? {
        let s = ingest::normalize_amplitude(&rec.samples, rec.fs)?;
        let img = qpr::quantum_pattern_recognition(&s, &SweepConfig::default(), &rec.segment_id)?;
        let (p, trace) = net.forward_trace(&img.pixels)?;
        println!("{}: p(good) = {p:.4}", rec.segment_id);
        for st in trace {
            println!("  {:<6} {:?}", st.name, st.shape);
        }
    }
    Ok(())
}

//! Generate a labeled synthetic dataset and write it as a segment CSV.
//!
//! `cargo run --example synth_dataset -- segments.csv`

use ppg_qpr::ingest;
use ppg_qpr::synth::{self, ArtifactKind, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_segments.csv".into());
    let cfg = SynthConfig { n_good: 8, n_bad: 8, seed: 2024, ..SynthConfig::default() };
    let recs = synth::generate(&cfg)?;
    ingest::save_segments_csv(&recs, out.as_ref())?;
    println!("wrote {} segments to {out}", recs.len());

    for kind in [ArtifactKind::BaselineWander, ArtifactKind::Burst, ArtifactKind::Dropout, ArtifactKind::Saturation] {
        let bad = synth::gen_bad_with(&cfg, 0, kind);
        let dev = bad.samples.iter().zip(&bad.clean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{kind:?}: max deviation from the clean pulse {dev:.2}");
    }
    Ok(())
}

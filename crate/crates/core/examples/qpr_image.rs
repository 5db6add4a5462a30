//! Encode one synthetic segment as a QPR image and write it as PGM.
//!
//! `cargo run --example qpr_image -- out.pgm`

use ppg_qpr::qpr::{self, SweepConfig};
use ppg_qpr::synth::{self, SynthConfig};
use ppg_qpr::ingest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "qpr_example.pgm".into());
    let cfg = SynthConfig { n_good: 1, n_bad: 0, seed: 42, ..SynthConfig::default() };
    let rec = &synth::generate(&cfg)?[0];
    let signal = ingest::normalize_amplitude(&rec.samples, rec.fs)?;

    let img = qpr::quantum_pattern_recognition(&signal, &SweepConfig::default(), &rec.segment_id)?;
    println!("segment {}", img.segment_id);
    for c in &img.sweep {
        let err = c.error.map_or("invalid".to_string(), |e| format!("{e:.4}"));
        println!("  Ω = {:6.3}  h = {:.5}  error {err}", c.omega, c.h);
    }
    println!("selected h = {:.5}, error {:.4}", img.h_selected, img.recon_error);

    let gray = qpr::to_grayscale(&img.pixels)?;
    qpr::write_pgm_file(std::path::Path::new(&out), img.pixels.rows(), img.pixels.cols(), &gray)?;
    println!("wrote {out}");
    Ok(())
}

//! STFT image of the same segment, for comparison with the QPR encoding.

use ppg_qpr::qpr::{self, SweepConfig};
use ppg_qpr::synth::{self, SynthConfig};
use ppg_qpr::ingest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig { n_good: 1, n_bad: 1, seed: 3, ..SynthConfig::default() };
    for rec in synth::generate(&cfg)? {
        let s = ingest::normalize_amplitude(&rec.samples, rec.fs)?;
        let stft = qpr::stft_image(&s, 64, 8)?;
        let q = qpr::quantum_pattern_recognition(&s, &SweepConfig::default(), &rec.segment_id)?;

        // Non-DC frequency bin carrying the most energy across all frames.
        let energy: Vec<f64> = stft.iter_rows().map(|r| r.iter().sum()).collect();
        let top = (1..energy.len()).max_by(|&a, &b| energy[a].total_cmp(&energy[b])).unwrap();
        println!(
            "{} ({}): STFT {}x{}, dominant bin {top} ({:.2} Hz); QPR {}x{}, h = {:.5}",
            rec.segment_id,
            rec.label.as_str(),
            stft.rows(),
            stft.cols(),
            top as f64 * rec.fs / 64.0,
            q.pixels.rows(),
            q.pixels.cols(),
            q.h_selected
        );
    }
    Ok(())
}

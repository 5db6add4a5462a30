//! Window a raw recording, attach annotations, and split the labeled pool.

use ppg_qpr::ingest::{self, Annotation, DatasetManifest, Label, SplitMode};
use ppg_qpr::synth;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Five minutes of clean pulse at 100 Hz stands in for a recording.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<f64> = (0..60).flat_map(|_| synth::clean_pulse_train(&mut rng, 100.0, 72.0, 1.0, 0.01)).collect();
    let mut recs = ingest::segment_recording("subj01", &raw, 100.0, 500);
    println!("{} samples -> {} segments", raw.len(), recs.len());

    // Annotate every third segment bad, the rest good; one is left out.
    let anns: Vec<Annotation> = recs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, r)| Annotation {
            segment_id: r.segment_id.clone(),
            label: if i % 3 == 0 { Label::Bad } else { Label::Good },
            annotator: "demo".into(),
            timestamp: "2024-01-01T00:00:00Z".into(),
        })
        .collect();
    let manifest = ingest::merge_annotations(&DatasetManifest::from_records(&recs, "segments.csv")?, &anns)?;
    ingest::apply_labels(&mut recs, &manifest);
    println!("pool (good, bad) = {:?}, unlabeled {}", manifest.pool_counts(), manifest.count(Label::Unlabeled));

    let (train, test) = ingest::split_pool(&recs, 0.8, 11, SplitMode::Random)?;
    println!("train {} / test {}", train.len(), test.len());
    Ok(())
}

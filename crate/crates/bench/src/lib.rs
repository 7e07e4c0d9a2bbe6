//! Shared fixtures for the benchmarks under `benches/`.

use affect_core::{synth, Extractor, ExtractorConfig, FeatureMatrix};

/// Feature table of `n` synthetic 3 s clips and a target derived from loudness.
pub fn corpus_features(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let ex = Extractor::new(ExtractorConfig::default()).expect("default extractor config is valid");
    let clips = synth::corpus(n, 3.0, 22050, seed);
    let items: Vec<_> = clips
        .iter()
        .zip(ex.summarize_many(&clips))
        .map(|(c, v)| (c.source_id().to_string(), v.expect("synthetic clips summarize")))
        .collect();
    let y = items
        .iter()
        .map(|(_, v)| (2.0 * v.get("dynamics_rms_mean").unwrap() / 0.5 - 1.0).clamp(-1.0, 1.0))
        .collect();
    (FeatureMatrix::from_vectors(items).expect("68 columns"), y)
}

//! Chroma-based tonal descriptors: key clarity, mode and harmonic change.

use std::f64::consts::PI;

use crate::dsp::Spectrum;

use super::rhythm::parabolic_offset;
use super::spectral::spectral_peaks;

/// Krumhansl–Kessler probe-tone profiles, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
pub const MINOR_PROFILE: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

pub const CHROMA_MIN_HZ: f64 = 65.406;
pub const CHROMA_MAX_HZ: f64 = 4186.0;

pub type Chroma = [f64; 12];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TonalDescriptors {
    /// Best major minus best minor key score, clamped to [-1, 1].
    pub mode: f64,
    pub key_clarity: f64,
    pub hcdf: f64,
}

/// Pitch class of `freq` with C = 0, tuned to A440.
pub fn pitch_class(freq: f64) -> usize {
    let semis = (12.0 * (freq / 440.0).log2()).round() as i64 + 9;
    semis.rem_euclid(12) as usize
}

/// Maps spectral peaks onto the 12 pitch classes. Each peak contributes its
/// magnitude divided by its frequency, which offsets the growth of bins per
/// semitone with pitch.
pub fn chroma_from_spectrum(spec: &Spectrum, rel_threshold: f64) -> Chroma {
    let mut chroma = [0.0; 12];
    let m = &spec.magnitudes;
    for k in spectral_peaks(spec, rel_threshold) {
        let f = (k as f64 + parabolic_offset(m[k - 1], m[k], m[k + 1])) * spec.bin_hz;
        if (CHROMA_MIN_HZ..=CHROMA_MAX_HZ).contains(&f) {
            chroma[pitch_class(f)] += m[k] / f;
        }
    }
    chroma
}

fn centered(profile: &[f64; 12]) -> [f64; 12] {
    let mean = profile.iter().sum::<f64>() / 12.0;
    profile.map(|v| v - mean)
}

/// Cosine between the chroma and the mean-centred key profile rotated to
/// `tonic`. A flat chroma scores 0 against every key.
pub fn key_score(chroma: &Chroma, profile: &[f64; 12], tonic: usize) -> f64 {
    let p = centered(profile);
    let norm_c = chroma.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_p = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_c == 0.0 {
        return 0.0;
    }
    let dot: f64 = (0..12).map(|pc| chroma[pc] * p[(pc + 12 - tonic) % 12]).sum();
    dot / (norm_c * norm_p)
}

/// (best major score, best minor score)
pub fn best_key_scores(chroma: &Chroma) -> (f64, f64) {
    let best = |profile| {
        (0..12)
            .map(|t| key_score(chroma, profile, t))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (best(&MAJOR_PROFILE), best(&MINOR_PROFILE))
}

/// Six-dimensional tonal centroid (circle of fifths, minor and major thirds).
pub fn tonal_centroid(chroma: &Chroma) -> [f64; 6] {
    let total: f64 = chroma.iter().sum();
    let mut out = [0.0; 6];
    if total <= 0.0 {
        return out;
    }
    let rings = [(1.0, 7.0 * PI / 6.0), (1.0, 3.0 * PI / 2.0), (0.5, 2.0 * PI / 3.0)];
    for (pc, &c) in chroma.iter().enumerate() {
        let w = c / total;
        for (r, &(radius, step)) in rings.iter().enumerate() {
            let angle = pc as f64 * step;
            out[2 * r] += w * radius * angle.sin();
            out[2 * r + 1] += w * radius * angle.cos();
        }
    }
    out
}

/// Descriptors of one analysis window from its per-frame chromas.
pub fn tonal_from_chromas(frames: &[Chroma]) -> TonalDescriptors {
    let mut total = [0.0; 12];
    for c in frames {
        for pc in 0..12 {
            total[pc] += c[pc];
        }
    }
    if total.iter().all(|&v| v == 0.0) {
        return TonalDescriptors::default();
    }
    let (major, minor) = best_key_scores(&total);
    let centroids: Vec<[f64; 6]> = frames.iter().map(tonal_centroid).collect();
    let hcdf = if centroids.len() < 2 {
        0.0
    } else {
        centroids
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / (centroids.len() - 1) as f64
    };
    TonalDescriptors {
        mode: (major - minor).clamp(-1.0, 1.0),
        key_clarity: major.max(minor).clamp(0.0, 1.0),
        hcdf,
    }
}

//! Frame-level descriptors: dynamics, spectral shape, timbre.

use crate::dsp::{dct_ii, MelFilterbank, Spectrum};
use crate::error::{Error, Result};

/// Power floor used by flatness.
pub const FLATNESS_FLOOR: f64 = 1e-12;
/// Energy floor inside the MFCC logarithm.
pub const MFCC_LOG_FLOOR: f64 = 1e-10;
pub const N_MFCC: usize = 13;

pub fn rms(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoments {
    pub centroid: f64,
    pub spread: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Moments of the magnitude spectrum treated as a distribution over bin
/// frequencies. Kurtosis is non-excess. A zero-spread spectrum reports
/// skewness and kurtosis of 0.
pub fn spectral_moments(spec: &Spectrum) -> Result<SpectralMoments> {
    let total = spec.total();
    if total <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    let p = |k: usize| spec.magnitudes[k] / total;
    let centroid: f64 = (0..spec.len()).map(|k| spec.freq(k) * p(k)).sum();
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for k in 0..spec.len() {
        let d = spec.freq(k) - centroid;
        let w = p(k);
        m2 += d * d * w;
        m3 += d * d * d * w;
        m4 += d * d * d * d * w;
    }
    let spread = m2.sqrt();
    let (skewness, kurtosis) = if spread > 0.0 {
        (m3 / spread.powi(3), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    Ok(SpectralMoments {
        centroid,
        spread,
        skewness,
        kurtosis,
    })
}

/// Geometric over arithmetic mean of the power spectrum.
pub fn spectral_flatness(spec: &Spectrum) -> f64 {
    if spec.is_empty() {
        return 0.0;
    }
    let n = spec.len() as f64;
    let (mut log_sum, mut sum) = (0.0, 0.0);
    for m in &spec.magnitudes {
        let p = (m * m).max(FLATNESS_FLOOR);
        log_sum += p.ln();
        sum += p;
    }
    ((log_sum / n).exp() / (sum / n)).clamp(0.0, 1.0)
}

/// Shannon entropy of the normalized magnitudes over log(#bins).
pub fn spectral_entropy(spec: &Spectrum) -> Result<f64> {
    let total = spec.total();
    if total <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    if spec.len() < 2 {
        return Ok(0.0);
    }
    let h: f64 = spec
        .magnitudes
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|m| {
            let p = m / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / (spec.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Lowest bin frequency at which cumulative power reaches `fraction` of the total.
pub fn spectral_rolloff(spec: &Spectrum, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("rolloff fraction {fraction}")));
    }
    let total: f64 = spec.magnitudes.iter().map(|m| m * m).sum();
    if total <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    let threshold = fraction * total;
    let mut cum = 0.0;
    for (k, m) in spec.magnitudes.iter().enumerate() {
        cum += m * m;
        if cum >= threshold {
            return Ok(spec.freq(k));
        }
    }
    // Only reachable through rounding when fraction == 1.
    Ok(spec.freq(spec.len() - 1))
}

/// Interior local maxima above `rel_threshold` times the largest magnitude.
pub fn spectral_peaks(spec: &Spectrum, rel_threshold: f64) -> Vec<usize> {
    let m = &spec.magnitudes;
    let max = m.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 || m.len() < 3 {
        return Vec::new();
    }
    let floor = rel_threshold * max;
    (1..m.len() - 1)
        .filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] > floor)
        .collect()
}

/// Plomp–Levelt dissonance of two partials.
pub fn pair_dissonance(f1: f64, a1: f64, f2: f64, a2: f64) -> f64 {
    let s = 0.24 / (0.021 * f1.min(f2) + 19.0);
    let df = (f1 - f2).abs();
    a1 * a2 * ((-3.5 * s * df).exp() - (-5.75 * s * df).exp())
}

/// Sum of pairwise dissonance over the spectral peaks.
pub fn spectral_roughness(spec: &Spectrum, rel_threshold: f64) -> f64 {
    let peaks = spectral_peaks(spec, rel_threshold);
    let mut total = 0.0;
    for (i, &a) in peaks.iter().enumerate() {
        for &b in &peaks[i + 1..] {
            total += pair_dissonance(spec.freq(a), spec.magnitudes[a], spec.freq(b), spec.magnitudes[b]);
        }
    }
    total
}

/// Jensen irregularity: squared successive differences over total energy.
pub fn spectral_irregularity(spec: &Spectrum) -> Result<f64> {
    let m = &spec.magnitudes;
    let energy: f64 = m.iter().map(|v| v * v).sum();
    if m.len() < 2 || energy <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    let diff: f64 = m.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
    Ok(diff / energy)
}

/// Euclidean distance between consecutive magnitude spectra.
pub fn spectral_flux(current: &Spectrum, previous: &Spectrum) -> Result<f64> {
    if current.len() != previous.len() {
        return Err(Error::LengthMismatch {
            left: current.len(),
            right: previous.len(),
        });
    }
    Ok(current
        .magnitudes
        .iter()
        .zip(&previous.magnitudes)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Flux per frame; the first frame has flux 0.
pub fn flux_curve(spectra: &[Spectrum]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spectra.len());
    if spectra.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in spectra.windows(2) {
        out.push(spectral_flux(&w[1], &w[0]).expect("spectra share one analyzer"));
    }
    out
}

const NOVELTY_SMOOTHING: usize = 5;

/// Half-wave rectified first difference of the flux curve, smoothed by a
/// centered moving average (truncated at the edges).
pub fn spectral_novelty(flux: &[f64]) -> Vec<f64> {
    let n = flux.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut rect = vec![0.0; n];
    for t in 1..n {
        rect[t] = (flux[t] - flux[t - 1]).max(0.0);
    }
    let half = NOVELTY_SMOOTHING / 2;
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(n);
            rect[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Coefficients 1..=13 of the DCT of log mel energies.
pub fn mfcc(spec: &Spectrum, filterbank: &MelFilterbank) -> Result<[f64; N_MFCC]> {
    if filterbank.n_bins() != spec.len() {
        return Err(Error::LengthMismatch {
            left: filterbank.n_bins(),
            right: spec.len(),
        });
    }
    if filterbank.n_filters() <= N_MFCC {
        return Err(Error::InvalidArgument(format!(
            "need more than {N_MFCC} mel filters, have {}",
            filterbank.n_filters()
        )));
    }
    let power: Vec<f64> = spec.magnitudes.iter().map(|m| m * m).collect();
    let log_mel: Vec<f64> = filterbank
        .apply(&power)
        .into_iter()
        .map(|e| (e + MFCC_LOG_FLOOR).ln())
        .collect();
    let c = dct_ii(&log_mel, N_MFCC + 1);
    let mut out = [0.0; N_MFCC];
    out.copy_from_slice(&c[1..]);
    Ok(out)
}

/// Fraction of consecutive sample pairs whose sign differs. Zeros inherit
/// the previous sign; a leading zero counts as positive.
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let mut positive = frame[0] >= 0.0;
    let mut crossings = 0usize;
    for &x in &frame[1..] {
        if x == 0.0 {
            continue;
        }
        let now = x > 0.0;
        if now != positive {
            crossings += 1;
            positive = now;
        }
    }
    crossings as f64 / (frame.len() - 1) as f64
}

/// Fraction of frames with RMS strictly below the curve mean.
pub fn low_energy(rms_curve: &[f64]) -> f64 {
    if rms_curve.is_empty() {
        return 0.0;
    }
    let mean = rms_curve.iter().sum::<f64>() / rms_curve.len() as f64;
    rms_curve.iter().filter(|&&r| r < mean).count() as f64 / rms_curve.len() as f64
}

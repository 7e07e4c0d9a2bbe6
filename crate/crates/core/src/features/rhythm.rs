//! Medium-window rhythm descriptors computed from the spectral-flux onset envelope.

use crate::dsp::{autocorrelate, hann_window, SpectrumAnalyzer};

use super::spectral::spectral_novelty;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RhythmDescriptors {
    /// Frequency (Hz) of the strongest amplitude modulation.
    pub fluctuation_peak_hz: f64,
    pub pulse_clarity: f64,
    pub tempo_bpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmSettings {
    pub min_bpm: f64,
    pub max_bpm: f64,
    pub fluctuation_min_hz: f64,
    pub fluctuation_max_hz: f64,
}

impl Default for RhythmSettings {
    fn default() -> Self {
        RhythmSettings {
            min_bpm: 40.0,
            max_bpm: 200.0,
            fluctuation_min_hz: 0.2,
            fluctuation_max_hz: 10.0,
        }
    }
}

const MIN_FLUCTUATION_FFT: usize = 512;

/// Vertex offset of the parabola through three equally spaced points, in (-0.5, 0.5).
pub(crate) fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < f64::EPSILON * mid.abs().max(1.0) {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Rhythm descriptors of one analysis window, given its per-frame flux
/// curve and the frame rate. A flat envelope yields all zeros.
pub fn rhythm_from_flux(flux: &[f64], frame_rate: f64, settings: &RhythmSettings) -> RhythmDescriptors {
    let envelope = spectral_novelty(flux);
    let n = envelope.len();
    if n < 3 {
        return RhythmDescriptors::default();
    }
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = envelope.iter().map(|v| v - mean).collect();
    let deviation = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if deviation == 0.0 || deviation <= 1e-12 * mean.abs() {
        return RhythmDescriptors::default();
    }

    let fluctuation_peak_hz = {
        let padded_len = n.next_power_of_two().max(MIN_FLUCTUATION_FFT);
        let mut padded = centered.clone();
        padded.resize(padded_len, 0.0);
        let mut window = hann_window(n);
        window.resize(padded_len, 0.0);
        let spec = SpectrumAnalyzer::new(window, 1).analyze(&padded);
        let bin_hz = frame_rate / padded_len as f64;
        let lo = ((settings.fluctuation_min_hz / bin_hz).ceil() as usize).max(1);
        let hi = ((settings.fluctuation_max_hz / bin_hz).floor() as usize).min(spec.len() - 2);
        if lo > hi {
            0.0
        } else {
            let k = (lo..=hi)
                .max_by(|&a, &b| spec.magnitudes[a].total_cmp(&spec.magnitudes[b]))
                .unwrap();
            let m = &spec.magnitudes;
            (k as f64 + parabolic_offset(m[k - 1], m[k], m[k + 1])) * bin_hz
        }
    };

    let min_lag = ((60.0 * frame_rate / settings.max_bpm).round() as usize).max(1);
    let max_lag = ((60.0 * frame_rate / settings.min_bpm).round() as usize).min(n - 2);
    let (tempo_bpm, pulse_clarity) = if min_lag > max_lag {
        (0.0, 0.0)
    } else {
        let ac = autocorrelate(&centered, max_lag + 1);
        let lag = (min_lag..=max_lag)
            .max_by(|&a, &b| ac[a].total_cmp(&ac[b]).then(b.cmp(&a)))
            .unwrap();
        let refined = lag as f64 + parabolic_offset(ac[lag - 1], ac[lag], ac[lag + 1]);
        (60.0 * frame_rate / refined, ac[lag].clamp(0.0, 1.0))
    };

    RhythmDescriptors {
        fluctuation_peak_hz,
        pulse_clarity,
        tempo_bpm,
    }
}

//! Signal-processing kernels shared by the feature extractors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Overlapping frames of a signal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    data: Vec<f64>,
    frame_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl FrameSeries {
    pub fn n_frames(&self) -> usize {
        self.data.len() / self.frame_len
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len)
    }

    /// Frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }
}

/// Samples in a frame of `ms` milliseconds, rounded to nearest.
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms / 1000.0 * sample_rate as f64).round() as usize
}

/// Hop for a frame length and overlap fraction.
pub fn hop_for(frame_len: usize, overlap_fraction: f64) -> usize {
    ((frame_len as f64 * (1.0 - overlap_fraction)).round() as usize).max(1)
}

pub fn frame_signal(clip: &AudioClip, frame_ms: f64, overlap_fraction: f64) -> Result<FrameSeries> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument(format!(
            "overlap fraction {overlap_fraction} not in [0, 1)"
        )));
    }
    let frame_len = ms_to_samples(frame_ms, clip.sample_rate());
    frame_samples(
        clip.samples(),
        frame_len,
        hop_for(frame_len, overlap_fraction),
        clip.sample_rate(),
    )
}

/// Frames `samples` with explicit length and hop; trailing partial samples are dropped.
pub fn frame_samples(samples: &[f64], frame_len: usize, hop: usize, sample_rate: u32) -> Result<FrameSeries> {
    if frame_len < 2 || hop < 1 {
        return Err(Error::InvalidArgument(format!(
            "frame length {frame_len} / hop {hop} too small"
        )));
    }
    if samples.len() < frame_len {
        return Err(Error::ClipTooShort {
            needed: frame_len,
            got: samples.len(),
        });
    }
    let n_frames = 1 + (samples.len() - frame_len) / hop;
    let mut data = Vec::with_capacity(n_frames * frame_len);
    for i in 0..n_frames {
        data.extend_from_slice(&samples[i * hop..i * hop + frame_len]);
    }
    Ok(FrameSeries {
        data,
        frame_len,
        hop,
        sample_rate,
    })
}

/// Symmetric Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    assert!(n >= 2, "Hann window needs at least 2 points");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
        .collect()
}

/// One-sided magnitude spectrum, bins 0..=N/2 of an N-point transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn new(magnitudes: Vec<f64>, bin_hz: f64) -> Self {
        debug_assert!(magnitudes.iter().all(|m| *m >= 0.0 && m.is_finite()));
        Spectrum { magnitudes, bin_hz }
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn total(&self) -> f64 {
        self.magnitudes.iter().sum()
    }

    pub fn is_silent(&self) -> bool {
        self.magnitudes.iter().all(|&m| m == 0.0)
    }
}

/// Reusable windowed FFT for frames of a fixed length.
pub struct SpectrumAnalyzer {
    window: Vec<f64>,
    n_fft: usize,
    bin_hz: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(window: Vec<f64>, sample_rate: u32) -> Self {
        let n_fft = window.len().next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        SpectrumAnalyzer {
            window,
            n_fft,
            bin_hz: sample_rate as f64 / n_fft as f64,
            fft,
        }
    }

    pub fn hann(frame_len: usize, sample_rate: u32) -> Self {
        Self::new(hann_window(frame_len), sample_rate)
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn analyze(&self, frame: &[f64]) -> Spectrum {
        assert_eq!(frame.len(), self.window.len(), "frame/window length mismatch");
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.n_fft)
            .collect();
        self.fft.process(&mut buf);
        Spectrum::new(
            buf[..self.n_bins()].iter().map(|c| c.norm()).collect(),
            self.bin_hz,
        )
    }
}

/// |DFT(frame ⊙ window)| after zero-padding to the next power of two.
pub fn fft_magnitude(frame: &[f64], window: &[f64], sample_rate: u32) -> Result<Spectrum> {
    if frame.len() != window.len() {
        return Err(Error::LengthMismatch {
            left: frame.len(),
            right: window.len(),
        });
    }
    if frame.is_empty() {
        return Err(Error::InvalidArgument("empty frame".into()));
    }
    Ok(SpectrumAnalyzer::new(window.to_vec(), sample_rate).analyze(frame))
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, one row per filter over `n_fft/2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Filter energies of a power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(
    n_filters: usize,
    n_fft: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_filters == 0 || n_fft < 2 || !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(Error::InvalidArgument(format!(
            "bad filterbank: {n_filters} filters, n_fft {n_fft}, [{f_min}, {f_max}] Hz at {sample_rate} Hz"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let weights = (0..n_filters)
        .map(|j| {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect();
    Ok(MelFilterbank {
        weights,
        centers_hz: edges[1..=n_filters].to_vec(),
    })
}

/// Orthonormal DCT-II, first `n_coeffs` coefficients.
pub fn dct_ii(input: &[f64], n_coeffs: usize) -> Vec<f64> {
    let n = input.len();
    assert!(n_coeffs <= n, "more coefficients than inputs");
    let nf = n as f64;
    (0..n_coeffs)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, x)| x * (PI * (i as f64 + 0.5) * k as f64 / nf).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Autocorrelation for lags `0..=max_lag`, normalized so `r[0] == 1`.
/// An all-zero signal yields all zeros.
pub fn autocorrelate(signal: &[f64], max_lag: usize) -> Vec<f64> {
    assert!(max_lag < signal.len(), "max_lag must be below the signal length");
    let raw: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            signal[..signal.len() - lag]
                .iter()
                .zip(&signal[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let r0 = raw[0];
    if r0 == 0.0 {
        return vec![0.0; max_lag + 1];
    }
    raw.into_iter().map(|r| r / r0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_counts() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let f = frame_samples(&x, 4, 2, 100).unwrap();
        assert_eq!(f.n_frames(), 4);
        let starts: Vec<f64> = f.iter().map(|fr| fr[0]).collect();
        assert_eq!(starts, vec![0.0, 2.0, 4.0, 6.0]);

        assert_eq!(frame_samples(&x[..4], 4, 2, 100).unwrap().n_frames(), 1);
        assert!(matches!(
            frame_samples(&x[..3], 4, 2, 100),
            Err(Error::ClipTooShort { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn framing_from_milliseconds() {
        let clip = AudioClip::new(vec![0.0; 1000], 1000, "x").unwrap();
        let f = frame_signal(&clip, 50.0, 0.5).unwrap();
        assert_eq!((f.frame_len(), f.hop()), (50, 25));
        assert_eq!(f.n_frames(), 1 + (1000 - 50) / 25);
        assert!(frame_signal(&clip, 50.0, 1.0).is_err());
    }

    #[test]
    fn hann_closed_forms() {
        assert_eq!(hann_window(2), vec![0.0, 0.0]);
        let w3 = hann_window(3);
        assert!((w3[0]).abs() < 1e-15 && (w3[1] - 1.0).abs() < 1e-15 && w3[2].abs() < 1e-15);
        let w4 = hann_window(4);
        for (a, b) in w4.iter().zip([0.0, 0.75, 0.75, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let w = hann_window(101);
        assert!(w.iter().all(|v| *v <= 1.0));
        for i in 0..101 {
            assert!((w[i] - w[100 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_bin_cosine() {
        let n = 64;
        let k = 5;
        let frame: Vec<f64> = (0..n).map(|i| (2.0 * PI * k as f64 * i as f64 / n as f64).cos()).collect();
        let spec = fft_magnitude(&frame, &vec![1.0; n], 640).unwrap();
        assert_eq!(spec.len(), 33);
        assert_eq!(spec.bin_hz, 10.0);
        let peak = (0..spec.len()).max_by(|&a, &b| spec.magnitudes[a].total_cmp(&spec.magnitudes[b])).unwrap();
        assert_eq!(peak, k);
        assert!((spec.magnitudes[k] - n as f64 / 2.0).abs() < 1e-9);
        for (i, m) in spec.magnitudes.iter().enumerate() {
            if i != k {
                assert!(*m < 1e-9);
            }
        }
    }

    #[test]
    fn zero_frame_and_padding() {
        let spec = fft_magnitude(&[0.0; 100], &hann_window(100), 1000).unwrap();
        assert_eq!(spec.len(), 65);
        assert!(spec.is_silent());
        assert!(fft_magnitude(&[0.0; 4], &[1.0; 3], 1000).is_err());
    }

    #[test]
    fn mel_scale_closed_form() {
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape() {
        let fb = mel_filterbank(40, 2048, 22050, 20.0, 11025.0).unwrap();
        assert_eq!(fb.n_filters(), 40);
        assert_eq!(fb.n_bins(), 1025);
        assert!(fb.centers_hz.windows(2).all(|w| w[0] < w[1]));
        for row in &fb.weights {
            assert!(row.iter().all(|w| *w >= 0.0));
            // unimodal: non-decreasing up to the peak, non-increasing after
            let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
            assert!(row[peak] > 0.0);
        }
        assert!(mel_filterbank(10, 512, 8000, 100.0, 5000.0).is_err());
    }

    #[test]
    fn dct_of_constant_and_zero() {
        let c = dct_ii(&[3.0; 16], 16);
        assert!((c[0] - 3.0 * 4.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        assert!(dct_ii(&[0.0; 8], 8).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn autocorrelation_periodicity() {
        let period = 8;
        let x: Vec<f64> = (0..200).map(|i| (2.0 * PI * i as f64 / period as f64).sin()).collect();
        let r = autocorrelate(&x, 20);
        assert_eq!(r[0], 1.0);
        assert!(r[period] > r[period - 1] && r[period] > r[period + 1]);
        assert_eq!(autocorrelate(&[0.0; 10], 3), vec![0.0; 4]);
    }
}

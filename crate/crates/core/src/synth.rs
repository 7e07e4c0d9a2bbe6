//! Deterministic synthetic test signals.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioClip;

fn clip(samples: Vec<f64>, sample_rate: u32, id: &str) -> AudioClip {
    AudioClip::new(samples, sample_rate, id).expect("synthetic signals are finite and non-empty")
}

pub fn sine(freq: f64, amplitude: f64, secs: f64, sample_rate: u32) -> AudioClip {
    let n = (secs * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    clip(
        (0..n).map(|i| amplitude * (2.0 * PI * freq * i as f64 / sr).sin()).collect(),
        sample_rate,
        "sine",
    )
}

/// Equal-amplitude sum of sines, scaled so the peak stays within [-1, 1].
pub fn chord(freqs: &[f64], secs: f64, sample_rate: u32) -> AudioClip {
    let n = (secs * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    let a = 1.0 / freqs.len() as f64;
    clip(
        (0..n)
            .map(|i| freqs.iter().map(|f| a * (2.0 * PI * f * i as f64 / sr).sin()).sum())
            .collect(),
        sample_rate,
        "chord",
    )
}

pub fn white_noise(amplitude: f64, secs: f64, sample_rate: u32, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * sample_rate as f64).round() as usize;
    clip(
        (0..n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect(),
        sample_rate,
        "noise",
    )
}

/// Short decaying noise bursts at `rate_hz` clicks per second.
pub fn click_train(rate_hz: f64, amplitude: f64, secs: f64, sample_rate: u32, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    let period = sr / rate_hz;
    let click_len = (0.01 * sr) as usize;
    let mut samples = vec![0.0; n];
    let mut onset = 0.0;
    while (onset as usize) < n {
        let start = onset as usize;
        for (k, s) in samples[start..(start + click_len).min(n)].iter_mut().enumerate() {
            let decay = (-(k as f64) / (0.002 * sr)).exp();
            *s = amplitude * decay * rng.gen_range(-1.0..1.0);
        }
        onset += period;
    }
    clip(samples, sample_rate, "clicks")
}

/// Random mixture of a tone, broadband noise and a click train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    pub tone_hz: f64,
    pub tone_gain: f64,
    pub noise_gain: f64,
    pub click_rate_hz: f64,
    pub click_gain: f64,
}

impl MixtureParams {
    pub fn random(rng: &mut impl Rng) -> Self {
        MixtureParams {
            tone_hz: 110.0 * 2f64.powf(rng.gen_range(0.0..4.0)),
            tone_gain: rng.gen_range(0.0..0.6),
            noise_gain: rng.gen_range(0.0..0.3),
            click_rate_hz: rng.gen_range(1.0..4.0),
            click_gain: rng.gen_range(0.0..0.5),
        }
    }
}

pub fn mixture(p: &MixtureParams, secs: f64, sample_rate: u32, seed: u64) -> AudioClip {
    let tone = sine(p.tone_hz, p.tone_gain, secs, sample_rate);
    let noise = white_noise(p.noise_gain, secs, sample_rate, seed);
    let clicks = click_train(p.click_rate_hz, p.click_gain, secs, sample_rate, seed ^ 0x9e37_79b9);
    let samples = tone
        .samples()
        .iter()
        .zip(noise.samples())
        .zip(clicks.samples())
        .map(|((a, b), c)| (a + b + c).clamp(-1.0, 1.0))
        .collect();
    clip(samples, sample_rate, "mixture")
}

/// `n` mixture clips with ids `clip_000`, `clip_001`, ...
pub fn corpus(n: usize, secs: f64, sample_rate: u32, seed: u64) -> Vec<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = MixtureParams::random(&mut rng);
            let c = mixture(&p, secs, sample_rate, seed.wrapping_add(i as u64 + 1));
            AudioClip::new(c.samples().to_vec(), sample_rate, format!("clip_{i:03}")).unwrap()
        })
        .collect()
}

/// Writes a clip as 16-bit PCM WAV.
pub fn write_wav(path: &std::path::Path, clip: &AudioClip) -> crate::Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io = |e: hound::Error| crate::Error::Io(std::io::Error::other(e.to_string()));
    let mut w = hound::WavWriter::create(path, spec).map_err(io)?;
    for s in clip.samples() {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).map_err(io)?;
    }
    w.finalize().map_err(io)
}

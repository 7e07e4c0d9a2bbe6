//! The 68-dimensional clip descriptor: 34 base features, each summarized by
//! its mean and sample standard deviation.
//!
//! Spectral, dynamic and timbral features are computed on short frames over
//! the whole clip. Low-energy, rhythm and tonal features are computed per
//! medium-length window and summarized across windows.

pub mod rhythm;
pub mod spectral;
pub mod tonal;

use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip};
use crate::dsp::{self, MelFilterbank, Spectrum, SpectrumAnalyzer};
use crate::error::{Error, Result};

pub use rhythm::{rhythm_from_flux, RhythmDescriptors, RhythmSettings};
pub use tonal::{TonalDescriptors, tonal_from_chromas};

pub const FEATURE_SCHEMA_VERSION: u32 = 1;
pub const N_BASE_FEATURES: usize = 34;
pub const N_FEATURES: usize = 2 * N_BASE_FEATURES;

const BASE_FEATURES: [&str; N_BASE_FEATURES] = [
    "dynamics_rms",
    "rhythm_fluctuationmax_peakpos",
    "rhythm_pulseclarity",
    "rhythm_tempo",
    "spectral_centroid",
    "spectral_spread",
    "spectral_skewness",
    "spectral_kurtosis",
    "spectral_flatness",
    "spectral_entropy",
    "spectral_rolloff85",
    "spectral_rolloff95",
    "spectral_roughness",
    "spectral_irregularity",
    "spectral_novelty",
    "spectral_mfcc_1",
    "spectral_mfcc_2",
    "spectral_mfcc_3",
    "spectral_mfcc_4",
    "spectral_mfcc_5",
    "spectral_mfcc_6",
    "spectral_mfcc_7",
    "spectral_mfcc_8",
    "spectral_mfcc_9",
    "spectral_mfcc_10",
    "spectral_mfcc_11",
    "spectral_mfcc_12",
    "spectral_mfcc_13",
    "timbre_zerocross",
    "timbre_lowenergy",
    "timbre_spectralflux",
    "tonal_mode",
    "tonal_keyclarity",
    "tonal_hcdf",
];

// Indices into BASE_FEATURES.
const RMS: usize = 0;
const FLUCT: usize = 1;
const PULSE: usize = 2;
const TEMPO: usize = 3;
const CENTROID: usize = 4;
const SPREAD: usize = 5;
const SKEW: usize = 6;
const KURT: usize = 7;
const FLAT: usize = 8;
const ENTROPY: usize = 9;
const ROLL85: usize = 10;
const ROLL95: usize = 11;
const ROUGH: usize = 12;
const IRREG: usize = 13;
const NOVELTY: usize = 14;
const MFCC0: usize = 15;
const ZCR: usize = 28;
const LOWENERGY: usize = 29;
const FLUX: usize = 30;
const MODE: usize = 31;
const KEYCLARITY: usize = 32;
const HCDF: usize = 33;

/// Canonical base-feature names.
pub fn base_feature_names() -> &'static [&'static str; N_BASE_FEATURES] {
    &BASE_FEATURES
}

/// The 68 column names in canonical order, mean before std per base feature.
/// MFCC columns follow the `spectral_mfcc_mean_<i>` / `spectral_mfcc_std_<i>` pattern.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        BASE_FEATURES
            .iter()
            .flat_map(|base| match base.strip_prefix("spectral_mfcc_") {
                Some(i) => [format!("spectral_mfcc_mean_{i}"), format!("spectral_mfcc_std_{i}")],
                None => [format!("{base}_mean"), format!("{base}_std")],
            })
            .collect()
    })
}

pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_version: u32,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// Extraction parameters. Defaults: 22.05 kHz mono, 50 ms frames with 50%
/// overlap, 2 s medium windows with 50% overlap, 40 mel bands from 20 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    pub sample_rate: u32,
    pub frame_ms: f64,
    pub overlap: f64,
    pub medium_window_s: f64,
    pub medium_overlap: f64,
    pub mel_filters: usize,
    pub mel_f_min: f64,
    /// Upper mel edge; Nyquist when absent.
    pub mel_f_max: Option<f64>,
    /// Relative threshold for spectral peak picking (roughness, chroma).
    pub peak_threshold: f64,
    pub tonal_frame_len: usize,
    pub tonal_hop: usize,
    pub min_bpm: f64,
    pub max_bpm: f64,
    /// Peak-normalize clips after decoding.
    pub normalize_peak: bool,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            sample_rate: 22050,
            frame_ms: 50.0,
            overlap: 0.5,
            medium_window_s: 2.0,
            medium_overlap: 0.5,
            mel_filters: 40,
            mel_f_min: 20.0,
            mel_f_max: None,
            peak_threshold: 0.01,
            tonal_frame_len: 4096,
            tonal_hop: 2048,
            min_bpm: 40.0,
            max_bpm: 200.0,
            normalize_peak: false,
        }
    }
}

/// Precomputed analysis tables for one configuration; shareable across threads.
pub struct Extractor {
    config: ExtractorConfig,
    frame_len: usize,
    hop: usize,
    medium_len: usize,
    medium_hop: usize,
    analyzer: SpectrumAnalyzer,
    tonal_analyzer: SpectrumAnalyzer,
    filterbank: MelFilterbank,
    rhythm: RhythmSettings,
}

/// Mean and sample standard deviation (n - 1); empty series give (0, 0) and
/// singletons a zero deviation.
pub fn mean_std(series: &[f64]) -> (f64, f64) {
    match series.len() {
        0 => (0.0, 0.0),
        1 => (series[0], 0.0),
        n => {
            let mean = series.iter().sum::<f64>() / n as f64;
            let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        }
    }
}

impl Extractor {
    pub fn new(config: ExtractorConfig) -> Result<Self> {
        let sr = config.sample_rate;
        if sr == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.overlap) || !(0.0..1.0).contains(&config.medium_overlap) {
            return Err(Error::InvalidArgument("overlap must lie in [0, 1)".into()));
        }
        let frame_len = dsp::ms_to_samples(config.frame_ms, sr);
        if frame_len < 2 {
            return Err(Error::InvalidArgument(format!("frame of {} ms is too short", config.frame_ms)));
        }
        let hop = dsp::hop_for(frame_len, config.overlap);
        let medium_len = (config.medium_window_s * sr as f64).round() as usize;
        if medium_len < frame_len + hop {
            return Err(Error::InvalidArgument("medium window must hold at least two frames".into()));
        }
        if config.tonal_frame_len < 2 || config.tonal_frame_len > medium_len || config.tonal_hop == 0 {
            return Err(Error::InvalidArgument("tonal frame must fit inside the medium window".into()));
        }
        let analyzer = SpectrumAnalyzer::hann(frame_len, sr);
        let f_max = config.mel_f_max.unwrap_or(sr as f64 / 2.0);
        let filterbank = dsp::mel_filterbank(config.mel_filters, analyzer.n_fft(), sr, config.mel_f_min, f_max)?;
        if filterbank.n_filters() <= spectral::N_MFCC {
            return Err(Error::InvalidArgument("need more than 13 mel filters".into()));
        }
        Ok(Extractor {
            frame_len,
            hop,
            medium_len,
            medium_hop: dsp::hop_for(medium_len, config.medium_overlap),
            analyzer,
            tonal_analyzer: SpectrumAnalyzer::hann(config.tonal_frame_len, sr),
            filterbank,
            rhythm: RhythmSettings {
                min_bpm: config.min_bpm,
                max_bpm: config.max_bpm,
                ..RhythmSettings::default()
            },
            config,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn bin_hz(&self) -> f64 {
        self.analyzer.bin_hz()
    }

    /// Shortest clip (in samples at the canonical rate) that can be summarized.
    pub fn min_samples(&self) -> usize {
        self.medium_len.max(self.frame_len + self.hop)
    }

    fn conform(&self, clip: &AudioClip) -> Result<AudioClip> {
        let clip = audio::resample(clip, self.config.sample_rate)?;
        if self.config.normalize_peak {
            audio::normalize_peak(&clip)
        } else {
            Ok(clip)
        }
    }

    fn medium_windows(&self, n_samples: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let count = if n_samples < self.medium_len {
            0
        } else {
            1 + (n_samples - self.medium_len) / self.medium_hop
        };
        (0..count).map(move |w| (w * self.medium_hop, w * self.medium_hop + self.medium_len))
    }

    /// Low-level frame indices lying entirely inside `[start, end)`.
    fn frames_within(&self, start: usize, end: usize, n_frames: usize) -> std::ops::Range<usize> {
        let first = start.div_ceil(self.hop);
        let last = ((end - self.frame_len) / self.hop + 1).min(n_frames);
        first..last.max(first)
    }

    fn check_length(&self, clip: &AudioClip) -> Result<()> {
        if clip.len() < self.min_samples() {
            return Err(Error::ClipTooShort {
                needed: self.min_samples(),
                got: clip.len(),
            });
        }
        Ok(())
    }

    /// Rhythm descriptors for each medium window.
    pub fn rhythm_windows(&self, clip: &AudioClip) -> Result<Vec<RhythmDescriptors>> {
        let clip = self.conform(clip)?;
        if clip.len() < self.medium_len {
            return Err(Error::WindowTooShort {
                needed: self.medium_len,
                got: clip.len(),
            });
        }
        let frames = dsp::frame_samples(clip.samples(), self.frame_len, self.hop, clip.sample_rate())?;
        let spectra: Vec<Spectrum> = frames.iter().map(|f| self.analyzer.analyze(f)).collect();
        let flux = spectral::flux_curve(&spectra);
        Ok(self.rhythm_from_curve(&flux, clip.len(), frames.frame_rate()))
    }

    /// Window-averaged rhythm descriptors of a clip.
    pub fn rhythm_features(&self, clip: &AudioClip) -> Result<RhythmDescriptors> {
        let w = self.rhythm_windows(clip)?;
        let n = w.len() as f64;
        Ok(RhythmDescriptors {
            fluctuation_peak_hz: w.iter().map(|d| d.fluctuation_peak_hz).sum::<f64>() / n,
            pulse_clarity: w.iter().map(|d| d.pulse_clarity).sum::<f64>() / n,
            tempo_bpm: w.iter().map(|d| d.tempo_bpm).sum::<f64>() / n,
        })
    }

    fn rhythm_from_curve(&self, flux: &[f64], n_samples: usize, frame_rate: f64) -> Vec<RhythmDescriptors> {
        self.medium_windows(n_samples)
            .map(|(s, e)| {
                let range = self.frames_within(s, e, flux.len());
                rhythm_from_flux(&flux[range], frame_rate, &self.rhythm)
            })
            .collect()
    }

    /// Tonal descriptors for each medium window.
    pub fn tonal_windows(&self, clip: &AudioClip) -> Result<Vec<TonalDescriptors>> {
        let clip = self.conform(clip)?;
        if clip.len() < self.medium_len {
            return Err(Error::WindowTooShort {
                needed: self.medium_len,
                got: clip.len(),
            });
        }
        self.medium_windows(clip.len())
            .map(|(s, e)| {
                let frames = dsp::frame_samples(
                    &clip.samples()[s..e],
                    self.config.tonal_frame_len,
                    self.config.tonal_hop,
                    clip.sample_rate(),
                )?;
                let chromas: Vec<tonal::Chroma> = frames
                    .iter()
                    .map(|f| tonal::chroma_from_spectrum(&self.tonal_analyzer.analyze(f), self.config.peak_threshold))
                    .collect();
                Ok(tonal_from_chromas(&chromas))
            })
            .collect()
    }

    /// Window-averaged tonal descriptors of a clip.
    pub fn tonal_features(&self, clip: &AudioClip) -> Result<TonalDescriptors> {
        let w = self.tonal_windows(clip)?;
        let n = w.len() as f64;
        Ok(TonalDescriptors {
            mode: w.iter().map(|d| d.mode).sum::<f64>() / n,
            key_clarity: w.iter().map(|d| d.key_clarity).sum::<f64>() / n,
            hcdf: w.iter().map(|d| d.hcdf).sum::<f64>() / n,
        })
    }

    /// Per-base-feature value series for a clip already at the canonical rate.
    fn series(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        self.check_length(clip)?;
        let mut s: Vec<Vec<f64>> = vec![Vec::new(); N_BASE_FEATURES];
        let frames = dsp::frame_samples(clip.samples(), self.frame_len, self.hop, clip.sample_rate())?;
        let spectra: Vec<Spectrum> = frames.iter().map(|f| self.analyzer.analyze(f)).collect();
        let threshold = self.config.peak_threshold;

        let rms_curve: Vec<f64> = frames.iter().map(spectral::rms).collect();
        s[RMS] = rms_curve.clone();
        s[ZCR] = frames.iter().map(spectral::zero_crossing_rate).collect();
        let flux = spectral::flux_curve(&spectra);
        s[NOVELTY] = spectral::spectral_novelty(&flux);
        s[FLUX] = flux.clone();

        for spec in spectra.iter().filter(|sp| !sp.is_silent()) {
            let m = spectral::spectral_moments(spec)?;
            s[CENTROID].push(m.centroid);
            s[SPREAD].push(m.spread);
            s[SKEW].push(m.skewness);
            s[KURT].push(m.kurtosis);
            s[FLAT].push(spectral::spectral_flatness(spec));
            s[ENTROPY].push(spectral::spectral_entropy(spec)?);
            s[ROLL85].push(spectral::spectral_rolloff(spec, 0.85)?);
            s[ROLL95].push(spectral::spectral_rolloff(spec, 0.95)?);
            s[ROUGH].push(spectral::spectral_roughness(spec, threshold));
            s[IRREG].push(spectral::spectral_irregularity(spec)?);
            for (i, c) in spectral::mfcc(spec, &self.filterbank)?.into_iter().enumerate() {
                s[MFCC0 + i].push(c);
            }
        }

        for (start, end) in self.medium_windows(clip.len()) {
            let range = self.frames_within(start, end, rms_curve.len());
            s[LOWENERGY].push(spectral::low_energy(&rms_curve[range]));
        }
        for d in self.rhythm_from_curve(&flux, clip.len(), frames.frame_rate()) {
            s[FLUCT].push(d.fluctuation_peak_hz);
            s[PULSE].push(d.pulse_clarity);
            s[TEMPO].push(d.tempo_bpm);
        }
        for d in self.tonal_windows(clip)? {
            s[MODE].push(d.mode);
            s[KEYCLARITY].push(d.key_clarity);
            s[HCDF].push(d.hcdf);
        }
        Ok(s)
    }

    /// The canonical 68-dimensional summary of a clip.
    pub fn summarize(&self, clip: &AudioClip) -> Result<FeatureVector> {
        let clip = self.conform(clip)?;
        let series = self.series(&clip)?;
        let mut values = Vec::with_capacity(N_FEATURES);
        for s in &series {
            let (mean, std) = mean_std(s);
            values.push(mean);
            values.push(std);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidClip(format!(
                "feature {} is not finite for {}",
                feature_names()[i],
                clip.source_id()
            )));
        }
        Ok(FeatureVector {
            values,
            schema_version: FEATURE_SCHEMA_VERSION,
        })
    }

    /// Decodes, conditions and summarizes one WAV file.
    pub fn extract_file(&self, path: &Path) -> Result<FeatureVector> {
        self.summarize(&audio::read_wav(path)?)
    }

    /// Summarizes clips in parallel; results keep the input order.
    pub fn summarize_many(&self, clips: &[AudioClip]) -> Vec<Result<FeatureVector>> {
        clips.par_iter().map(|c| self.summarize(c)).collect()
    }

    /// Extracts files in parallel; results keep the input order.
    pub fn extract_files<P: AsRef<Path> + Sync>(&self, paths: &[P]) -> Vec<Result<FeatureVector>> {
        paths.par_iter().map(|p| self.extract_file(p.as_ref())).collect()
    }
}

/// Summarizes a clip with the default configuration.
pub fn summarize(clip: &AudioClip) -> Result<FeatureVector> {
    Extractor::new(ExtractorConfig::default())?.summarize(clip)
}

/// Dataset-level feature table: one row per clip, 68 canonical columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: DMatrix<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: DMatrix<f64>, row_ids: Vec<String>) -> Result<Self> {
        if rows.ncols() != N_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: N_FEATURES,
                got: rows.ncols(),
            });
        }
        if rows.nrows() != row_ids.len() {
            return Err(Error::LengthMismatch {
                left: rows.nrows(),
                right: row_ids.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::SchemaMismatch(format!("duplicate row id `{dup}`")));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::SchemaMismatch("non-finite feature value".into()));
        }
        Ok(FeatureMatrix { rows, row_ids })
    }

    pub fn from_vectors(items: Vec<(String, FeatureVector)>) -> Result<Self> {
        let n = items.len();
        let mut rows = DMatrix::zeros(n, N_FEATURES);
        let mut ids = Vec::with_capacity(n);
        for (i, (id, fv)) in items.into_iter().enumerate() {
            if fv.values.len() != N_FEATURES {
                return Err(Error::DimensionMismatch {
                    expected: N_FEATURES,
                    got: fv.values.len(),
                });
            }
            for (j, v) in fv.values.iter().enumerate() {
                rows[(i, j)] = *v;
            }
            ids.push(id);
        }
        FeatureMatrix::new(rows, ids)
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn n_samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn names(&self) -> &'static [String] {
        feature_names()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["clip_id".to_string()];
        header.extend(feature_names().iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.rows.row(i).iter().map(|v| format_significant(*v, 9)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("clip_id") || header[1..] != *feature_names() {
            return Err(Error::SchemaMismatch(format!(
                "feature CSV header does not match the {N_FEATURES}-column schema"
            )));
        }
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::SchemaMismatch(e.to_string()))?;
            if rec.len() != N_FEATURES + 1 {
                return Err(Error::SchemaMismatch(format!("row {} has {} fields", line + 2, rec.len())));
            }
            ids.push(rec[0].to_string());
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::SchemaMismatch(format!("row {}: `{field}` is not a number", line + 2)))?;
                values.push(v);
            }
        }
        let rows = DMatrix::from_row_slice(ids.len(), N_FEATURES, &values);
        FeatureMatrix::new(rows, ids)
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> DMatrix<f64> {
        self.rows.select_rows(idx)
    }
}

/// Formats `x` with `sig` significant digits in the style of C's `%g`.
pub fn format_significant(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= sig as i32 {
        format!("{}e{}", trim_fraction(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

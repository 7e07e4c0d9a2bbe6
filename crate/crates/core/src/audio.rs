//! Audio ingestion: WAV decoding, band-limited resampling, peak normalization
//! and the CSV annotation manifest.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidClip("no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Same clip with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        AudioClip::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
            self.source_id.clone(),
        )
    }
}

/// Arousal/valence pair in normalized AV space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectLabel {
    pub arousal: f64,
    pub valence: f64,
}

impl AffectLabel {
    pub fn new(arousal: f64, valence: f64) -> Result<Self> {
        for v in [arousal, valence] {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "affect component {v} outside [-1, 1]"
                )));
            }
        }
        Ok(AffectLabel { arousal, valence })
    }
}

/// Declared raw annotation range, mapped affinely onto [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRange {
    pub min: f64,
    pub max: f64,
}

impl LabelRange {
    pub const NORMALIZED: LabelRange = LabelRange { min: -1.0, max: 1.0 };

    pub fn normalize(&self, raw: f64) -> f64 {
        if *self == Self::NORMALIZED {
            return raw;
        }
        2.0 * (raw - self.min) / (self.max - self.min) - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clip_path: String,
    pub label: AffectLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative clip paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, clip_path: &str) -> PathBuf {
        let p = Path::new(clip_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Referenced audio files that do not exist on disk.
    pub fn missing_files(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !self.resolve(&e.clip_path).is_file())
            .map(|e| e.clip_path.clone())
            .collect()
    }

    pub fn label_of(&self, clip_path: &str) -> Option<AffectLabel> {
        self.entries
            .iter()
            .find(|e| e.clip_path == clip_path)
            .map(|e| e.label)
    }
}

/// Decodes a RIFF/WAVE byte buffer into a mono clip scaled to [-1, 1].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    decode_wav_from(Cursor::new(bytes), "<memory>")
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path)?;
    decode_wav_from(Cursor::new(bytes), &path.to_string_lossy())
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedEncoding("non-PCM or unsupported format".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample width too large".into()),
        hound::Error::FormatError(msg) => Error::MalformedContainer(msg.to_string()),
        hound::Error::UnfinishedSample => Error::MalformedContainer("unfinished sample".into()),
        hound::Error::InvalidSampleFormat => Error::MalformedContainer("invalid sample format".into()),
        hound::Error::IoError(e) => Error::MalformedContainer(e.to_string()),
    }
}

fn decode_wav_from<R: Read>(reader: R, source_id: &str) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            wav.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{fmt:?} with {bits} bits")));
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(Error::MalformedContainer("partial frame at end of data".into()));
    }
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(Error::MalformedContainer("data chunk holds no samples".into()));
    }
    AudioClip::new(mono, spec.sample_rate, source_id)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman window evaluated at `x` in [-1, 1].
fn blackman(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let t = PI * (x + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

const SINC_ZERO_CROSSINGS: f64 = 32.0;
const MAX_TABLE_PHASES: u64 = 4096;

/// Polyphase windowed-sinc kernel set for a rational rate change.
struct SincKernels {
    up: u64,
    down: u64,
    half: i64,
    cutoff: f64,
    table: Option<Vec<Vec<f64>>>,
}

impl SincKernels {
    fn new(source: u32, target: u32) -> Self {
        let g = gcd(source as u64, target as u64);
        let up = target as u64 / g;
        let down = source as u64 / g;
        let cutoff = (target as f64 / source as f64).min(1.0);
        let half = (SINC_ZERO_CROSSINGS / cutoff).ceil() as i64;
        let mut k = SincKernels {
            up,
            down,
            half,
            cutoff,
            table: None,
        };
        if up <= MAX_TABLE_PHASES {
            k.table = Some((0..up).map(|p| k.weights(p as f64 / up as f64)).collect());
        }
        k
    }

    /// Taps for input offsets `-half+1 ..= half` relative to floor(t), where
    /// `frac` is the fractional part of t.
    fn weights(&self, frac: f64) -> Vec<f64> {
        let span = self.half as f64;
        let mut w: Vec<f64> = (-self.half + 1..=self.half)
            .map(|k| {
                let d = frac - k as f64;
                self.cutoff * sinc(self.cutoff * d) * blackman(d / span)
            })
            .collect();
        let sum: f64 = w.iter().sum();
        if sum != 0.0 {
            w.iter_mut().for_each(|v| *v /= sum);
        }
        w
    }
}

/// Band-limited resampling to `target_rate`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }
    let input = clip.samples();
    let len = input.len() as u64;
    let out_len = ((len * target_rate as u64 + source_rate as u64 / 2) / source_rate as u64).max(1);
    let kernels = SincKernels::new(source_rate, target_rate);

    let mut out = Vec::with_capacity(out_len as usize);
    for j in 0..out_len {
        let pos = j * kernels.down;
        let base = (pos / kernels.up) as i64;
        let phase = pos % kernels.up;
        let owned;
        let w: &[f64] = match &kernels.table {
            Some(t) => &t[phase as usize],
            None => {
                owned = kernels.weights(phase as f64 / kernels.up as f64);
                &owned
            }
        };
        let mut acc = 0.0;
        for (tap, k) in (-kernels.half + 1..=kernels.half).enumerate() {
            let idx = base + k;
            if idx >= 0 && (idx as u64) < len {
                acc += w[tap] * input[idx as usize];
            }
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate, clip.source_id())
}

/// Scales the clip so its largest absolute sample is 1.
pub fn normalize_peak(clip: &AudioClip) -> Result<AudioClip> {
    let peak = clip.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(Error::SilentClip);
    }
    AudioClip::new(
        clip.samples().iter().map(|s| s / peak).collect(),
        clip.sample_rate(),
        clip.source_id(),
    )
}

/// Loads a `path,arousal,valence` CSV. Labels are mapped from `range` onto
/// [-1, 1]; values outside the declared range are rejected.
pub fn load_manifest(path: &Path, range: Option<LabelRange>) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_manifest(&text, name, base_dir, range)
}

pub fn parse_manifest(
    text: &str,
    name: String,
    base_dir: PathBuf,
    range: Option<LabelRange>,
) -> Result<DatasetManifest> {
    let range = range.unwrap_or(LabelRange::NORMALIZED);
    if !(range.min < range.max) || !range.min.is_finite() || !range.max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "label range [{}, {}] is empty",
            range.min, range.max
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["path", "arousal", "valence"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `path,arousal,valence`, got `{}`", header.join(",")),
        });
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let clip_path = record[0].to_string();
        if clip_path.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty path".into(),
            });
        }
        let parse = |field: &str| -> Result<f64> {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() || v < range.min || v > range.max {
                return Err(Error::Range {
                    line,
                    value: v,
                    min: range.min,
                    max: range.max,
                });
            }
            Ok(range.normalize(v).clamp(-1.0, 1.0))
        };
        let arousal = parse(&record[1])?;
        let valence = parse(&record[2])?;
        if !seen.insert(clip_path.clone()) {
            return Err(Error::DuplicatePath(clip_path));
        }
        entries.push(ManifestEntry {
            clip_path,
            label: AffectLabel { arousal, valence },
        });
    }
    Ok(DatasetManifest {
        name,
        entries,
        base_dir,
    })
}

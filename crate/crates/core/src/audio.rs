//! WAV ingestion and framing into Hamming-windowed segment matrices.
//!
//! A recording becomes one [`SegmentMatrix`]: `n` frames of `frame_len`
//! samples each, taken at a hop of `frame_len - overlap_len`, with the
//! trailing partial frame discarded. At the reference rate of 50 kHz the
//! 64 ms / 30 ms defaults give 3200-sample frames and a 1700-sample hop.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scale applied to int16 PCM samples.
pub const PCM_SCALE: f64 = 1.0 / 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: malformed WAV header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: unsupported format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{path}: no audio frames")]
    EmptyAudio { path: PathBuf },
    #[error("window length {0} is below the minimum of 2")]
    InvalidLength(usize),
    #[error("signal has {len} samples, one frame needs {frame_len}")]
    TooShort { len: usize, frame_len: usize },
    #[error("invalid frame configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono audio normalized to `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub source_path: String,
}

impl Signal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Builds a signal from raw int16 PCM values.
    pub fn from_pcm16(pcm: &[i16], sample_rate_hz: u32, source_path: impl Into<String>) -> Self {
        Self {
            samples: pcm.iter().map(|&s| f64::from(s) * PCM_SCALE).collect(),
            sample_rate_hz,
            source_path: source_path.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Rectangular,
}

impl std::str::FromStr for WindowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hamming" => Ok(Self::Hamming),
            "rectangular" => Ok(Self::Rectangular),
            other => Err(format!("unknown window kind `{other}`")),
        }
    }
}

impl std::fmt::Display for WindowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hamming => "hamming",
            Self::Rectangular => "rectangular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub overlap_ms: f64,
    pub window_kind: WindowKind,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_ms: 64.0,
            overlap_ms: 30.0,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        if !(self.overlap_ms > 0.0 && self.overlap_ms < self.frame_ms) {
            return Err(AudioError::InvalidConfig(format!(
                "need 0 < overlap_ms < frame_ms, got overlap {} frame {}",
                self.overlap_ms, self.frame_ms
            )));
        }
        Ok(())
    }

    /// Samples per frame at the given rate.
    pub fn frame_len(&self, sample_rate_hz: u32) -> usize {
        (self.frame_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    pub fn overlap_len(&self, sample_rate_hz: u32) -> usize {
        (self.overlap_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate_hz: u32) -> usize {
        self.frame_len(sample_rate_hz) - self.overlap_len(sample_rate_hz)
    }
}

/// Row-major `rows x cols` matrix of windowed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl SegmentMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }
}

/// Reads a 16-bit PCM mono WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal, AudioError> {
    let path = path.as_ref();
    let io_err = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let malformed = |reason: &str| AudioError::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let unsupported = |reason: String| AudioError::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };

    let mut file = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 12];
    if file.read_exact(&mut magic).is_err() {
        return Err(malformed("file shorter than the RIFF header"));
    }
    if &magic[0..4] != b"RIFF" || &magic[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE magic"));
    }
    drop(file);

    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => io_err(source),
        hound::Error::Unsupported => unsupported("codec not supported".into()),
        hound::Error::FormatError(reason) => malformed(reason),
        other => malformed(&other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(unsupported("floating-point samples".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(unsupported(format!("{} bits per sample", spec.bits_per_sample)));
    }
    if spec.channels != 1 {
        return Err(unsupported(format!("{} channels", spec.channels)));
    }
    let pcm = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            hound::Error::IoError(source) => io_err(source),
            other => malformed(&other.to_string()),
        })?;
    if pcm.is_empty() {
        return Err(AudioError::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    Ok(Signal::from_pcm16(&pcm, spec.sample_rate, path.display().to_string()))
}

/// Writes 16-bit PCM mono.
pub fn write_wav(path: impl AsRef<Path>, pcm: &[i16], sample_rate_hz: u32) -> Result<(), AudioError> {
    let path = path.as_ref();
    let wrap = |e: hound::Error| AudioError::Io {
        path: path.to_path_buf(),
        source: match e {
            hound::Error::IoError(source) => source,
            other => std::io::Error::other(other.to_string()),
        },
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in pcm {
        writer.write_sample(s).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi k / (N - 1))`.
pub fn hamming_window(len: usize) -> Result<Vec<f64>, AudioError> {
    if len < 2 {
        return Err(AudioError::InvalidLength(len));
    }
    let denom = (len - 1) as f64;
    let mut w: Vec<f64> = (0..len)
        .map(|k| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos())
        .collect();
    // mirror so that w[k] == w[N-1-k] holds exactly
    for k in 0..len / 2 {
        w[len - 1 - k] = w[k];
    }
    Ok(w)
}

/// Number of full frames that fit in `len` samples.
pub fn segment_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len < frame_len {
        0
    } else {
        (len - frame_len) / hop + 1
    }
}

/// Splits a signal into overlapping windowed frames.
pub fn segment(signal: &Signal, cfg: &FrameConfig) -> Result<SegmentMatrix, AudioError> {
    cfg.validate()?;
    let frame_len = cfg.frame_len(signal.sample_rate_hz);
    let hop = cfg.hop(signal.sample_rate_hz);
    if frame_len < 2 || hop == 0 {
        return Err(AudioError::InvalidConfig(format!(
            "frame of {frame_len} samples with hop {hop} at {} Hz",
            signal.sample_rate_hz
        )));
    }
    let len = signal.len();
    if len < frame_len {
        return Err(AudioError::TooShort { len, frame_len });
    }
    let window = match cfg.window_kind {
        WindowKind::Hamming => hamming_window(frame_len)?,
        WindowKind::Rectangular => vec![1.0; frame_len],
    };
    let rows = segment_count(len, frame_len, hop);
    let mut values = Vec::with_capacity(rows * frame_len);
    for r in 0..rows {
        let start = r * hop;
        let frame = &signal.samples[start..start + frame_len];
        values.extend(frame.iter().zip(&window).map(|(s, w)| s * w));
    }
    Ok(SegmentMatrix {
        rows,
        cols: frame_len,
        values,
    })
}

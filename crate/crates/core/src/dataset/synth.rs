//! Two-class synthetic sustained-vowel corpus.
//!
//! Healthy files are the first five harmonics of a steady fundamental with a
//! little additive noise. Pathological files perturb the period and the
//! amplitude cycle by cycle (jitter and shimmer) and carry stronger
//! broadband noise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, Manifest, ManifestEntry};
use crate::audio::write_wav;
use crate::label::Label;
use crate::nn::Rng;

const HARMONICS: usize = 5;
const PEAK: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_healthy: usize,
    pub n_pathological: usize,
    pub sample_rate_hz: u32,
    /// Seconds, inclusive range.
    pub duration_s: (f64, f64),
    pub f0_hz: (f64, f64),
    /// Relative standard deviation of the per-cycle fundamental.
    pub jitter: f64,
    /// Relative standard deviation of the per-cycle amplitude.
    pub shimmer: f64,
    /// Noise standard deviation relative to full scale.
    pub healthy_noise: f64,
    pub pathological_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_healthy: 50,
            n_pathological: 50,
            sample_rate_hz: 8000,
            duration_s: (0.5, 1.0),
            f0_hz: (100.0, 250.0),
            jitter: 0.04,
            shimmer: 0.3,
            healthy_noise: 0.003,
            pathological_noise: 0.04,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Validates against the shortest admissible duration (one frame).
    pub fn validate(&self, min_duration_s: f64) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSynthSpec(m));
        let (lo, hi) = self.duration_s;
        if self.sample_rate_hz == 0 {
            return bad("sample rate must be positive".into());
        }
        if !(lo <= hi && lo >= min_duration_s) {
            return bad(format!("duration range ({lo}, {hi}) must be ordered and at least {min_duration_s} s"));
        }
        let (f_lo, f_hi) = self.f0_hz;
        if !(f_lo > 0.0 && f_lo <= f_hi && f_hi * HARMONICS as f64 <= f64::from(self.sample_rate_hz) / 2.0) {
            return bad(format!("f0 range ({f_lo}, {f_hi}) must be positive with harmonics below Nyquist"));
        }
        for (name, v) in [
            ("jitter", self.jitter),
            ("shimmer", self.shimmer),
            ("healthy_noise", self.healthy_noise),
            ("pathological_noise", self.pathological_noise),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// PCM samples for one file; deterministic in `(spec.seed, label, index)`.
pub fn synthesize_pcm(spec: &SynthSpec, label: Label, index: usize) -> Vec<i16> {
    let stream = ((label.index() as u64) << 32) | index as u64;
    let mut rng = Rng::new(spec.seed).derive(stream);
    let rate = f64::from(spec.sample_rate_hz);
    let duration = rng.uniform(spec.duration_s.0, spec.duration_s.1);
    let len = (duration * rate).round() as usize;
    let f0 = rng.uniform(spec.f0_hz.0, spec.f0_hz.1);
    let pathological = label == Label::Pathological;
    let (jitter, shimmer, noise) = if pathological {
        (spec.jitter, spec.shimmer, spec.pathological_noise)
    } else {
        (0.0, 0.0, spec.healthy_noise)
    };
    let norm: f64 = (1..=HARMONICS).map(|k| 1.0 / k as f64).sum();

    let mut phase = 0.0f64;
    let mut cycle_f0 = f0;
    let mut cycle_amp = 1.0;
    let mut pcm = Vec::with_capacity(len);
    for _ in 0..len {
        let voiced: f64 = (1..=HARMONICS)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 * phase).sin() / k as f64)
            .sum();
        let x = PEAK * cycle_amp * voiced / norm + noise * rng.normal();
        pcm.push((x.clamp(-1.0, 1.0) * 32767.0).round() as i16);

        let next = phase + cycle_f0 / rate;
        if next.floor() > phase.floor() {
            cycle_f0 = f0 * (1.0 + jitter * rng.normal()).max(0.5);
            cycle_amp = (1.0 + shimmer * rng.normal()).clamp(0.1, 1.9);
        }
        phase = next;
    }
    pcm
}

/// Writes `healthy_NNNN.wav` and `pathological_NNNN.wav` files to `out_dir`
/// and returns their manifest (paths relative to `out_dir`, no split).
pub fn generate_synthetic_corpus(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| DatasetError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(spec.n_healthy + spec.n_pathological);
    for (label, count) in [(Label::Healthy, spec.n_healthy), (Label::Pathological, spec.n_pathological)] {
        for i in 0..count {
            let name = format!("{}_{i:04}.wav", label.as_str());
            let pcm = synthesize_pcm(spec, label, i);
            write_wav(out_dir.join(&name), &pcm, spec.sample_rate_hz)?;
            entries.push(ManifestEntry::new(name, label));
        }
    }
    Ok(Manifest {
        entries,
        base_dir: Some(out_dir.to_path_buf()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{read_wav, FrameConfig};

    fn zcr_variance(pcm: &[i16], frame: usize) -> f64 {
        let rates: Vec<f64> = pcm
            .chunks_exact(frame)
            .map(|f| f.windows(2).filter(|w| (w[0] >= 0) != (w[1] >= 0)).count() as f64 / frame as f64)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rates.len() as f64
    }

    #[test]
    fn empty_spec_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_healthy: 0,
            n_pathological: 0,
            ..SynthSpec::default()
        };
        let m = generate_synthetic_corpus(&spec, dir.path()).unwrap();
        assert!(m.is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn deterministic_files() {
        let spec = SynthSpec {
            n_healthy: 5,
            n_pathological: 0,
            seed: 7,
            ..SynthSpec::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_synthetic_corpus(&spec, a.path()).unwrap();
        generate_synthetic_corpus(&spec, b.path()).unwrap();
        for e in &ma.entries {
            let fa = std::fs::read(a.path().join(&e.file_path)).unwrap();
            let fb = std::fs::read(b.path().join(&e.file_path)).unwrap();
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn durations_cover_a_frame() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_healthy: 4,
            n_pathological: 4,
            ..SynthSpec::default()
        };
        spec.validate(0.064).unwrap();
        let m = generate_synthetic_corpus(&spec, dir.path()).unwrap();
        let frame_len = FrameConfig::default().frame_len(spec.sample_rate_hz);
        for e in &m.entries {
            let s = read_wav(m.resolve(e)).unwrap();
            assert_eq!(s.sample_rate_hz, 8000);
            assert!(s.len() >= frame_len && s.len() >= 4000 && s.len() <= 8000);
        }
    }

    #[test]
    fn classes_separable_by_zero_crossing_variance() {
        let spec = SynthSpec::default();
        let mean = |label| {
            (0..20).map(|i| zcr_variance(&synthesize_pcm(&spec, label, i), 256)).sum::<f64>() / 20.0
        };
        assert!(mean(Label::Pathological) > mean(Label::Healthy));
    }

    #[test]
    fn invalid_specs() {
        let spec = SynthSpec {
            duration_s: (0.01, 0.5),
            ..SynthSpec::default()
        };
        assert!(spec.validate(0.064).is_err());
        let spec = SynthSpec {
            f0_hz: (100.0, 2000.0),
            ..SynthSpec::default()
        };
        assert!(spec.validate(0.064).is_err());
    }
}

use rand::seq::SliceRandom;

use super::{DatasetError, Manifest, ManifestEntry, Split};
use crate::label::Label;
use crate::nn::Rng;

/// Train and validation fractions, applied to the healthy class size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.70,
            val_fraction: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t > 0.0 && v > 0.0 && t + v < 1.0) {
            return Err(DatasetError::InvalidFractions(format!(
                "need train > 0, val > 0 and train + val < 1, got train {t} val {v}"
            )));
        }
        Ok(())
    }

    /// Per-class counts for train and val given the healthy class size.
    pub fn per_class_counts(&self, healthy: usize) -> (usize, usize) {
        // small epsilon so that e.g. 0.7 * 10 floors to 7
        let take = |f: f64| (f * healthy as f64 + 1e-9).floor() as usize;
        (take(self.train_fraction), take(self.val_fraction))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    /// `(healthy, pathological)` per subset.
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
}

impl std::fmt::Display for SplitCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "train {}/{} val {}/{} test {}/{}",
            self.train.0, self.train.1, self.val.0, self.val.1, self.test.0, self.test.1
        )
    }
}

pub fn split_counts(manifest: &Manifest) -> SplitCounts {
    let pair = |s| (manifest.count(Some(s), Label::Healthy), manifest.count(Some(s), Label::Pathological));
    SplitCounts {
        train: pair(Split::Train),
        val: pair(Split::Val),
        test: pair(Split::Test),
    }
}

/// Class-balanced train/val, everything else to test.
///
/// With `H` healthy files, train takes `floor(train_fraction * H)` files of
/// each class and val `floor(val_fraction * H)` of each, sampled without
/// replacement. Entry order is preserved; only `split` is assigned.
pub fn make_split(entries: &[ManifestEntry], spec: &SplitSpec) -> Result<Manifest, DatasetError> {
    spec.validate()?;
    let indices_of = |label: Label| -> Vec<usize> {
        entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect()
    };
    let mut healthy = indices_of(Label::Healthy);
    let mut pathological = indices_of(Label::Pathological);
    for (label, idx) in [(Label::Healthy, &healthy), (Label::Pathological, &pathological)] {
        if idx.is_empty() {
            return Err(DatasetError::EmptyClass(label));
        }
    }
    let (n_train, n_val) = spec.per_class_counts(healthy.len());
    for (label, idx) in [(Label::Healthy, &healthy), (Label::Pathological, &pathological)] {
        if idx.len() < n_train + n_val {
            return Err(DatasetError::InsufficientHealthy {
                label,
                needed: n_train + n_val,
                available: idx.len(),
            });
        }
    }

    let mut rng = Rng::new(spec.seed);
    healthy.shuffle(&mut rng);
    pathological.shuffle(&mut rng);

    let mut out: Vec<ManifestEntry> = entries
        .iter()
        .map(|e| ManifestEntry {
            split: Some(Split::Test),
            ..e.clone()
        })
        .collect();
    for idx in [&healthy, &pathological] {
        for &i in &idx[..n_train] {
            out[i].split = Some(Split::Train);
        }
        for &i in &idx[n_train..n_train + n_val] {
            out[i].split = Some(Split::Val);
        }
    }
    Ok(Manifest::new(out))
}

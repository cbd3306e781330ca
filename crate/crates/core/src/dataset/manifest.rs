use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::label::Label;

pub const HEADER: [&str; 3] = ["file_path", "label", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file_path: String,
    pub label: Label,
    pub split: Option<Split>,
}

impl ManifestEntry {
    pub fn new(file_path: impl Into<String>, label: Label) -> Self {
        Self {
            file_path: file_path.into(),
            label,
            split: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { entries, base_dir: None }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subset(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Some(split)).collect()
    }

    pub fn count(&self, split: Option<Split>, label: Label) -> usize {
        self.entries
            .iter()
            .filter(|e| e.label == label && (split.is_none() || e.split == split))
            .count()
    }

    /// Absolute or base-relative location of an entry's audio file.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.file_path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();
    let malformed = |row: usize, reason: String| DatasetError::MalformedRow { row, reason };

    let header = match records.next() {
        None => return Err(malformed(1, "missing header `file_path,label,split`".into())),
        Some(r) => r.map_err(|e| malformed(1, e.to_string()))?,
    };
    if header.iter().map(str::trim).collect::<Vec<_>>() != HEADER {
        return Err(malformed(1, format!("expected header `file_path,label,split`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }

    let mut entries = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| malformed(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(malformed(row, format!("expected 3 fields, found {}", record.len())));
        }
        let file_path = record[0].to_string();
        if file_path.is_empty() {
            return Err(malformed(row, "empty file_path".into()));
        }
        let label = record[1]
            .trim()
            .parse::<Label>()
            .map_err(|label| DatasetError::UnknownLabel { row, label })?;
        let split = match record[2].trim() {
            "" => None,
            s => Some(s.parse::<Split>().map_err(|e| malformed(row, e))?),
        };
        entries.push(ManifestEntry { file_path, label, split });
    }
    Ok(Manifest {
        entries,
        base_dir: path.parent().map(Path::to_path_buf),
    })
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io = |source: std::io::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let csv_io = |e: csv::Error| io(std::io::Error::other(e.to_string()));
    let mut writer = csv::Writer::from_path(path).map_err(csv_io)?;
    writer.write_record(HEADER).map_err(csv_io)?;
    for e in &manifest.entries {
        writer
            .write_record([e.file_path.as_str(), e.label.as_str(), e.split.map_or("", Split::as_str)])
            .map_err(csv_io)?;
    }
    writer.flush().map_err(io)
}

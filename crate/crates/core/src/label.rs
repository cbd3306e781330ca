use serde::{Deserialize, Serialize};

/// Binary class. Index 0 is pathological, index 1 healthy, everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pathological,
    Healthy,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Pathological, Label::Healthy];

    pub fn index(self) -> usize {
        match self {
            Self::Pathological => 0,
            Self::Healthy => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Self::Pathological),
            1 => Some(Self::Healthy),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pathological => "pathological",
            Self::Healthy => "healthy",
        }
    }

    /// One-hot target vector over the two classes.
    pub fn one_hot(self) -> [f64; 2] {
        let mut v = [0.0; 2];
        v[self.index()] = 1.0;
        v
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pathological" => Ok(Self::Pathological),
            "healthy" => Ok(Self::Healthy),
            other => Err(other.to_string()),
        }
    }
}

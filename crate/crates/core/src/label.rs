use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ground-truth or predicted class of an app. Malware is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Malware,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malware];

    /// 0 for benign, 1 for malware.
    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malware => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malware => "malware",
        }
    }

    /// Maps a malware probability to a label; exactly 0.5 is malware.
    pub fn from_score(score: f64) -> Label {
        if score >= 0.5 {
            Label::Malware
        } else {
            Label::Benign
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?} (expected benign or malware)")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" => Ok(Label::Benign),
            "malware" => Ok(Label::Malware),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

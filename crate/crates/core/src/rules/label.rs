use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five trainable repetition classes, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RepetitionType {
    StR,
    TrR,
    SuR,
    HoR,
    SyR,
}

impl RepetitionType {
    pub const ALL: [RepetitionType; 5] = [
        RepetitionType::StR,
        RepetitionType::TrR,
        RepetitionType::SuR,
        RepetitionType::HoR,
        RepetitionType::SyR,
    ];

    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RepetitionType::StR => "StR",
            RepetitionType::TrR => "TrR",
            RepetitionType::SuR => "SuR",
            RepetitionType::HoR => "HoR",
            RepetitionType::SyR => "SyR",
        }
    }

    /// Types whose pitch column is produced by a rule at generation time.
    pub fn is_rule_based(self) -> bool {
        matches!(self, RepetitionType::StR | RepetitionType::TrR)
    }
}

impl fmt::Display for RepetitionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepetitionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranspositionKind {
    Chromatic,
    Diatonic,
}

/// A constant shift: semitones for chromatic, scale degrees for diatonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transposition {
    pub kind: TranspositionKind,
    pub offset: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryKind {
    Horizontal,
    Vertical,
    Rotational,
}

impl SymmetryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryKind::Horizontal => "horizontal",
            SymmetryKind::Vertical => "vertical",
            SymmetryKind::Rotational => "rotational",
        }
    }
}

/// Outcome of classifying a motif pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepetitionLabel {
    Strict,
    Transpositional(Transposition),
    Subsequential,
    Homodirectional,
    Symmetric(SymmetryKind),
    /// Both homodirectional and symmetric; excluded from datasets.
    Ambiguous(SymmetryKind),
    None,
}

impl RepetitionLabel {
    /// The trainable class, if this label is one.
    pub fn repetition_type(&self) -> Option<RepetitionType> {
        match self {
            RepetitionLabel::Strict => Some(RepetitionType::StR),
            RepetitionLabel::Transpositional(_) => Some(RepetitionType::TrR),
            RepetitionLabel::Subsequential => Some(RepetitionType::SuR),
            RepetitionLabel::Homodirectional => Some(RepetitionType::HoR),
            RepetitionLabel::Symmetric(_) => Some(RepetitionType::SyR),
            RepetitionLabel::Ambiguous(_) | RepetitionLabel::None => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RepetitionLabel::Ambiguous(_) => "Ambiguous",
            RepetitionLabel::None => "None",
            other => other.repetition_type().unwrap().as_str(),
        }
    }

    /// Human-readable payload: `chromatic:+2`, `horizontal`, ...
    pub fn detail(&self) -> Option<String> {
        match self {
            RepetitionLabel::Transpositional(t) => Some(format!(
                "{}:{:+}",
                match t.kind {
                    TranspositionKind::Chromatic => "chromatic",
                    TranspositionKind::Diatonic => "diatonic",
                },
                t.offset
            )),
            RepetitionLabel::Symmetric(k) | RepetitionLabel::Ambiguous(k) => Some(k.as_str().to_string()),
            _ => None,
        }
    }

    pub fn matches(&self, requested: RepetitionType) -> bool {
        self.repetition_type() == Some(requested)
    }
}

/// Serializable `{label, detail}` form of a [`RepetitionLabel`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: String,
    #[serde(default)]
    pub detail: Option<String>,
}

impl From<RepetitionLabel> for Verdict {
    fn from(l: RepetitionLabel) -> Self {
        Verdict {
            label: l.name().to_string(),
            detail: l.detail(),
        }
    }
}

impl fmt::Display for RepetitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

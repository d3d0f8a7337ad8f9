use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const NUM_CLASSES: usize = 4;

/// Label code written to files for recordings without ground truth.
pub const UNLABELED_CODE: u16 = 0xFFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Smile,
    Anger,
    Neutral,
    #[serde(rename = "noface")]
    NoFace,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [ClassLabel::Smile, ClassLabel::Anger, ClassLabel::Neutral, ClassLabel::NoFace];

    /// Index used for file label codes and network logits.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Smile => "smile",
            ClassLabel::Anger => "anger",
            ClassLabel::Neutral => "neutral",
            ClassLabel::NoFace => "noface",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Domain(format!("unknown class label {s:?}")))
    }
}

/// Decodes a file label code; `None` means unlabeled.
pub fn label_from_code(code: u16) -> Option<Option<ClassLabel>> {
    if code == UNLABELED_CODE {
        Some(None)
    } else {
        ClassLabel::from_index(code as usize).map(Some)
    }
}

pub fn label_code(label: Option<ClassLabel>) -> u16 {
    label.map_or(UNLABELED_CODE, ClassLabel::code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for l in ClassLabel::ALL {
            assert_eq!(label_from_code(l.code()), Some(Some(l)));
            assert_eq!(l.name().parse::<ClassLabel>().unwrap(), l);
        }
        assert_eq!(label_from_code(UNLABELED_CODE), Some(None));
        assert_eq!(label_from_code(7), None);
        assert_eq!(ClassLabel::NoFace.code(), 3);
        assert_eq!(serde_json::to_string(&ClassLabel::NoFace).unwrap(), "\"noface\"");
    }
}

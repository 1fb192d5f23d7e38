use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which context segments accompany the target utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AblationCondition {
    /// Both personalities and dialogue history.
    #[serde(rename = "pd")]
    Pd,
    /// Personalities only.
    #[serde(rename = "p")]
    POnly,
    /// Dialogue history only.
    #[serde(rename = "d")]
    DOnly,
    /// Target utterance alone.
    #[serde(rename = "none")]
    Neither,
}

impl AblationCondition {
    /// Table order: (a) D, (b) P, (c) P+D, (d) none.
    pub const TABLE_ORDER: [AblationCondition; 4] = [
        AblationCondition::DOnly,
        AblationCondition::POnly,
        AblationCondition::Pd,
        AblationCondition::Neither,
    ];

    pub fn uses_personality(self) -> bool {
        matches!(self, AblationCondition::Pd | AblationCondition::POnly)
    }

    pub fn uses_history(self) -> bool {
        matches!(self, AblationCondition::Pd | AblationCondition::DOnly)
    }

    pub fn key(self) -> &'static str {
        match self {
            AblationCondition::Pd => "pd",
            AblationCondition::POnly => "p",
            AblationCondition::DOnly => "d",
            AblationCondition::Neither => "none",
        }
    }

    /// Row letter in the ablation table.
    pub fn row_letter(self) -> char {
        match self {
            AblationCondition::DOnly => 'a',
            AblationCondition::POnly => 'b',
            AblationCondition::Pd => 'c',
            AblationCondition::Neither => 'd',
        }
    }

    pub fn row_label(self) -> &'static str {
        match self {
            AblationCondition::DOnly => "(a) Only D: dialogue history",
            AblationCondition::POnly => "(b) Only P: personalities",
            AblationCondition::Pd => "(c) P+D",
            AblationCondition::Neither => "(d) None (baseline)",
        }
    }
}

impl fmt::Display for AblationCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for AblationCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pd" | "p+d" => Ok(AblationCondition::Pd),
            "p" => Ok(AblationCondition::POnly),
            "d" => Ok(AblationCondition::DOnly),
            "none" => Ok(AblationCondition::Neither),
            other => Err(Error::validation(format!("unknown ablation condition {other:?}"))),
        }
    }
}

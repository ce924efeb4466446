use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ForgeError;

/// NLI class. Serialized as the single letters `E`, `N`, `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "E")]
    Entailment,
    #[serde(rename = "N")]
    Neutral,
    #[serde(rename = "C")]
    Contradiction,
}

impl Label {
    /// Canonical order E, N, C. Also the tie-break order for predictions.
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn code(self) -> &'static str {
        match self {
            Label::Entailment => "E",
            Label::Neutral => "N",
            Label::Contradiction => "C",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Entailment => 0,
            Label::Neutral => 1,
            Label::Contradiction => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    /// Verbalizer token standing for this label in the cloze slot.
    pub fn verbalizer(self) -> &'static str {
        match self {
            Label::Entailment => "Yes",
            Label::Neutral => "Maybe",
            Label::Contradiction => "No",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Label {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "E" => Ok(Label::Entailment),
            "N" => Ok(Label::Neutral),
            "C" => Ok(Label::Contradiction),
            other => Err(ForgeError::validation(format!("unknown label {other:?}"))),
        }
    }
}

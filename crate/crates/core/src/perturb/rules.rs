use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbKind {
    Character,
    Location,
    Name,
    Number,
    Negation,
    Paraphrase,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 6] = [
        PerturbKind::Character,
        PerturbKind::Location,
        PerturbKind::Name,
        PerturbKind::Number,
        PerturbKind::Negation,
        PerturbKind::Paraphrase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::Character => "character",
            PerturbKind::Location => "location",
            PerturbKind::Name => "name",
            PerturbKind::Number => "number",
            PerturbKind::Negation => "negation",
            PerturbKind::Paraphrase => "paraphrase",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbKind {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "character" | "char" => Ok(PerturbKind::Character),
            "location" | "loc" => Ok(PerturbKind::Location),
            "name" => Ok(PerturbKind::Name),
            "number" | "num" => Ok(PerturbKind::Number),
            "negation" | "neg" => Ok(PerturbKind::Negation),
            "paraphrase" | "para" => Ok(PerturbKind::Paraphrase),
            other => Err(ForgeError::validation(format!("unknown perturbation kind {other:?}"))),
        }
    }
}

/// Parse a comma- or plus-separated kind list such as `number,paraphrase,name`.
pub fn parse_kinds(s: &str) -> Result<Vec<PerturbKind>> {
    s.split([',', '+']).filter(|p| !p.trim().is_empty()).map(PerturbKind::from_str).collect()
}

/// Label after a perturbation, or `Drop` when no label can be assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    To(Label),
    Drop,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::To(l) => write!(f, "{l}"),
            Transition::Drop => f.write_str("dropped"),
        }
    }
}

impl Serialize for Transition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Transition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "dropped" => Ok(Transition::Drop),
            other => other.parse().map(Transition::To).map_err(serde::de::Error::custom),
        }
    }
}

/// Per-kind label mapping, indexed E, N, C.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRule {
    table: BTreeMap<PerturbKind, [Transition; 3]>,
}

impl Default for TransitionRule {
    fn default() -> Self {
        use Label::*;
        use Transition::*;
        let identity = [To(Entailment), To(Neutral), To(Contradiction)];
        let flip_entailed = [To(Contradiction), To(Neutral), To(Contradiction)];
        let table = BTreeMap::from([
            (PerturbKind::Character, identity),
            (PerturbKind::Paraphrase, identity),
            (PerturbKind::Location, flip_entailed),
            (PerturbKind::Number, flip_entailed),
            (PerturbKind::Name, [To(Neutral); 3]),
            (PerturbKind::Negation, [To(Contradiction), To(Neutral), Drop]),
        ]);
        TransitionRule { table }
    }
}

impl TransitionRule {
    /// Default rules with negated contradictions mapped to `outcome` instead of dropped.
    pub fn with_negated_contradiction(outcome: Transition) -> Self {
        let mut r = TransitionRule::default();
        r.set(PerturbKind::Negation, Label::Contradiction, outcome);
        r
    }

    pub fn set(&mut self, kind: PerturbKind, from: Label, to: Transition) {
        self.table.get_mut(&kind).expect("every kind has a row")[from.index()] = to;
    }

    pub fn get(&self, kind: PerturbKind, from: Label) -> Transition {
        self.table[&kind][from.index()]
    }
}

pub fn transition_label(label: Label, kind: PerturbKind, rules: &TransitionRule) -> Transition {
    rules.get(kind, label)
}

/// Fold the rules over `kinds` left to right; a drop is absorbing.
pub fn fold_labels(label: Label, kinds: &[PerturbKind], rules: &TransitionRule) -> Transition {
    kinds.iter().try_fold(label, |l, k| match transition_label(l, *k, rules) {
        Transition::To(next) => Some(next),
        Transition::Drop => None,
    })
    .map_or(Transition::Drop, Transition::To)
}

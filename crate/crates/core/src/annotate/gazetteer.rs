//! Gazetteer-based entity detection.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::text::{is_all_digits, is_title_case, split_possessive, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Entity {
    None,
    PersonName,
    City,
    Country,
    Nationality,
    Number,
    Date,
}

impl Entity {
    pub fn is_location(self) -> bool {
        matches!(self, Entity::City | Entity::Country | Entity::Nationality)
    }
}

/// Entity over token indices `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub kind: Entity,
    pub start: usize,
    pub end: usize,
}

pub const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

pub fn is_month(word: &str) -> bool {
    MONTHS.contains(&word)
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    pub cities: HashSet<String>,
    pub countries: HashSet<String>,
    pub nationalities: HashSet<String>,
    pub first_names: HashSet<String>,
    pub last_names: HashSet<String>,
    /// Location → different location of the same class. Ordered for deterministic iteration.
    pub replacement_map: BTreeMap<String, String>,
}

fn term_list(raw: &str) -> HashSet<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl Gazetteer {
    pub fn from_sources(
        cities: &str,
        countries: &str,
        nationalities: &str,
        first_names: &str,
        last_names: &str,
        location_map: &str,
    ) -> Result<Self> {
        let mut g = Gazetteer {
            cities: term_list(cities),
            countries: term_list(countries),
            nationalities: term_list(nationalities),
            first_names: term_list(first_names),
            last_names: term_list(last_names),
            replacement_map: BTreeMap::new(),
        };
        for (i, line) in location_map.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line
                .split_once('\t')
                .ok_or_else(|| ForgeError::parse(format!("location map line {}: expected from<TAB>to", i + 1)))?;
            g.replacement_map.insert(from.trim().to_string(), to.trim().to_string());
        }
        g.validate()?;
        Ok(g)
    }

    /// Load from a directory holding `cities.txt`, `countries.txt`,
    /// `nationalities.txt`, `first_names.txt`, `last_names.txt` and `location_map.tsv`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| ForgeError::Io(format!("{}: {e}", dir.join(name).display())))
        };
        Gazetteer::from_sources(
            &read("cities.txt")?,
            &read("countries.txt")?,
            &read("nationalities.txt")?,
            &read("first_names.txt")?,
            &read("last_names.txt")?,
            &read("location_map.tsv")?,
        )
    }

    pub fn builtin() -> Self {
        Gazetteer::from_sources(
            include_str!("../../data/gazetteer/cities.txt"),
            include_str!("../../data/gazetteer/countries.txt"),
            include_str!("../../data/gazetteer/nationalities.txt"),
            include_str!("../../data/gazetteer/first_names.txt"),
            include_str!("../../data/gazetteer/last_names.txt"),
            include_str!("../../data/gazetteer/location_map.tsv"),
        )
        .expect("built-in gazetteer is valid")
    }

    pub fn location_class(&self, term: &str) -> Entity {
        if self.countries.contains(term) {
            Entity::Country
        } else if self.cities.contains(term) {
            Entity::City
        } else if self.nationalities.contains(term) {
            Entity::Nationality
        } else {
            Entity::None
        }
    }

    fn validate(&self) -> Result<()> {
        for (from, to) in &self.replacement_map {
            if from == to {
                return Err(ForgeError::validation(format!("location map entry {from:?} maps to itself")));
            }
            let (a, b) = (self.location_class(from), self.location_class(to));
            if a == Entity::None || a != b {
                return Err(ForgeError::validation(format!(
                    "location map entry {from:?} → {to:?} crosses classes ({a:?} → {b:?})"
                )));
            }
        }
        Ok(())
    }

    fn longest_location(&self, tokens: &[Token], start: usize) -> Option<(usize, Entity)> {
        const MAX_WORDS: usize = 4;
        let mut best = None;
        for len in 1..=MAX_WORDS.min(tokens.len() - start) {
            let words: Vec<&str> = tokens[start..start + len]
                .iter()
                .enumerate()
                .map(|(k, t)| if k + 1 == len { split_possessive(&t.text).0 } else { t.text.as_str() })
                .collect();
            let kind = self.location_class(&words.join(" "));
            if kind != Entity::None {
                best = Some((len, kind));
            }
        }
        best
    }

    /// Entity spans, longest match first, never overlapping.
    pub fn find_entities(&self, tokens: &[Token]) -> Vec<EntitySpan> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let text = tokens[i].text.as_str();
            if let Some((len, kind)) = self.longest_location(tokens, i) {
                spans.push(EntitySpan { kind, start: i, end: i + len });
                i += len;
                continue;
            }
            if i + 1 < tokens.len() && is_title_case(text) && self.first_names.contains(text) {
                let (last, _) = split_possessive(&tokens[i + 1].text);
                if is_title_case(last) && self.last_names.contains(last) {
                    spans.push(EntitySpan { kind: Entity::PersonName, start: i, end: i + 2 });
                    i += 2;
                    continue;
                }
            }
            if is_all_digits(text) {
                spans.push(EntitySpan { kind: Entity::Number, start: i, end: i + 1 });
            } else if is_month(text) {
                spans.push(EntitySpan { kind: Entity::Date, start: i, end: i + 1 });
            }
            i += 1;
        }
        spans
    }
}

/// Per-token entity labels from spans.
pub fn entity_labels(n_tokens: usize, spans: &[EntitySpan]) -> Vec<Entity> {
    let mut out = vec![Entity::None; n_tokens];
    for span in spans {
        for slot in &mut out[span.start..span.end.min(n_tokens)] {
            *slot = span.kind;
        }
    }
    out
}

//! Lexicon + suffix part-of-speech tagger over the universal tag set.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::numeral::is_number_word;
use crate::error::{ForgeError, Result};
use crate::text::{is_title_case, split_possessive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Pos {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl Pos {
    pub const ALL: [Pos; 17] = [
        Pos::ADJ, Pos::ADP, Pos::ADV, Pos::AUX, Pos::CCONJ, Pos::DET, Pos::INTJ, Pos::NOUN, Pos::NUM,
        Pos::PART, Pos::PRON, Pos::PROPN, Pos::PUNCT, Pos::SCONJ, Pos::SYM, Pos::VERB, Pos::X,
    ];

    /// Word classes eligible for conditional whole-word masking.
    pub fn is_cwwm_eligible(self) -> bool {
        matches!(
            self,
            Pos::ADJ | Pos::ADV | Pos::NOUN | Pos::VERB | Pos::PROPN | Pos::ADP | Pos::NUM | Pos::CCONJ | Pos::SCONJ
        )
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Pos {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Pos::ALL
            .iter()
            .copied()
            .find(|p| p.to_string() == upper)
            .ok_or_else(|| ForgeError::validation(format!("unknown POS tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbForm {
    Base,
    ThirdSingular,
    Past,
    PastParticiple,
    Gerund,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbEntry {
    pub lemma: String,
    pub form: VerbForm,
}

pub const MASK_TOKEN: &str = "<mask>";

/// Word lexicon plus verb inflection table.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    words: HashMap<String, Pos>,
    verbs: HashMap<String, VerbEntry>,
    bases: HashMap<String, [String; 5]>,
}

fn regular_forms(base: &str) -> [String; 5] {
    let consonant_y = base.ends_with('y')
        && base.len() > 1
        && !matches!(base.as_bytes()[base.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u');
    let third = if consonant_y {
        format!("{}ies", &base[..base.len() - 1])
    } else if ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| base.ends_with(s)) {
        format!("{base}es")
    } else {
        format!("{base}s")
    };
    let past = if consonant_y {
        format!("{}ied", &base[..base.len() - 1])
    } else if base.ends_with('e') {
        format!("{base}d")
    } else {
        format!("{base}ed")
    };
    let gerund = if base.ends_with('e') && !base.ends_with("ee") {
        format!("{}ing", &base[..base.len() - 1])
    } else {
        format!("{base}ing")
    };
    [base.to_string(), third, past.clone(), past, gerund]
}

impl PosLexicon {
    pub fn from_sources(words_tsv: &str, verbs_tsv: &str) -> Result<Self> {
        let mut lex = PosLexicon::default();
        for (i, line) in words_tsv.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| ForgeError::parse(format!("pos lexicon line {}: expected word<TAB>tag", i + 1)))?;
            lex.words.entry(word.trim().to_lowercase()).or_insert(tag.parse()?);
        }
        for (i, line) in verbs_tsv.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let forms: [String; 5] = match cols.len() {
                1 => regular_forms(cols[0]),
                5 => std::array::from_fn(|k| cols[k].to_string()),
                _ => return Err(ForgeError::parse(format!("verb table line {}: expected 1 or 5 columns", i + 1))),
            };
            let kinds = [VerbForm::Base, VerbForm::ThirdSingular, VerbForm::Past, VerbForm::PastParticiple, VerbForm::Gerund];
            for (form, kind) in forms.iter().zip(kinds) {
                lex.verbs
                    .entry(form.clone())
                    .or_insert(VerbEntry { lemma: forms[0].clone(), form: kind });
            }
            lex.bases.insert(forms[0].clone(), forms);
        }
        Ok(lex)
    }

    pub fn builtin() -> Self {
        PosLexicon::from_sources(
            include_str!("../../data/pos_lexicon.tsv"),
            include_str!("../../data/verbs.tsv"),
        )
        .expect("built-in POS lexicon is valid")
    }

    pub fn word_tag(&self, lower: &str) -> Option<Pos> {
        self.words.get(lower).copied()
    }

    pub fn verb(&self, lower: &str) -> Option<&VerbEntry> {
        self.verbs.get(lower)
    }

    /// Lemma and form, falling back to suffix rules for verbs outside the table.
    pub fn analyze_verb(&self, word: &str) -> (String, VerbForm) {
        let lower = word.to_lowercase();
        if let Some(v) = self.verbs.get(&lower) {
            return (v.lemma.clone(), v.form);
        }
        if let Some(stem) = lower.strip_suffix("ied") {
            return (format!("{stem}y"), VerbForm::Past);
        }
        if let Some(stem) = lower.strip_suffix("ed") {
            let with_e = format!("{stem}e");
            let lemma = if self.bases.contains_key(&with_e) || stem.ends_with(['v', 'c', 'z', 'u']) { with_e } else { stem.to_string() };
            return (lemma, VerbForm::Past);
        }
        if let Some(stem) = lower.strip_suffix("ing") {
            return (stem.to_string(), VerbForm::Gerund);
        }
        if let Some(stem) = lower.strip_suffix("ies") {
            return (format!("{stem}y"), VerbForm::ThirdSingular);
        }
        if lower.ends_with('s') && !lower.ends_with("ss") {
            let stem = &lower[..lower.len() - 1];
            if let Some(es) = stem.strip_suffix('e') {
                if ["s", "x", "z", "ch", "sh", "o"].iter().any(|s| es.ends_with(s)) {
                    return (es.to_string(), VerbForm::ThirdSingular);
                }
            }
            return (stem.to_string(), VerbForm::ThirdSingular);
        }
        (lower, VerbForm::Base)
    }
}

fn is_sentence_start(tokens: &[String], i: usize) -> bool {
    i == 0 || matches!(tokens[i - 1].as_str(), "." | "!" | "?" | ":" | ";" | "\"" | "(")
}

fn suffix_tag(lower: &str) -> Option<Pos> {
    if lower.len() <= 4 {
        return None;
    }
    if lower.ends_with("ly") {
        Some(Pos::ADV)
    } else if lower.ends_with("ed") || lower.ends_with("ing") {
        Some(Pos::VERB)
    } else if ["ous", "ful", "ive", "able", "ible", "less", "ical", "ish", "ese", "ian"]
        .iter()
        .any(|s| lower.ends_with(s))
    {
        Some(Pos::ADJ)
    } else {
        None
    }
}

fn punct_tag(token: &str) -> Pos {
    if token.chars().all(|c| matches!(c, '&' | '$' | '%' | '+' | '=' | '<' | '>' | '#' | '@' | '€' | '£' | '°')) {
        Pos::SYM
    } else {
        Pos::PUNCT
    }
}

impl PosLexicon {
    /// Tag a token sequence. Unknown words default to NOUN.
    pub fn tag(&self, tokens: &[String]) -> Vec<Pos> {
        let mut tags: Vec<Pos> = Vec::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            let prev = if i > 0 { Some(tags[i - 1]) } else { None };
            let prev_word = if i > 0 { tokens[i - 1].to_lowercase() } else { String::new() };
            tags.push(self.tag_one(tokens, i, token, prev, &prev_word));
        }
        tags
    }

    fn tag_one(&self, tokens: &[String], i: usize, token: &str, prev: Option<Pos>, prev_word: &str) -> Pos {
        if token == MASK_TOKEN {
            return Pos::X;
        }
        let first = match token.chars().next() {
            Some(c) => c,
            None => return Pos::X,
        };
        if !first.is_alphanumeric() {
            return punct_tag(token);
        }
        if token.chars().any(|c| c.is_ascii_digit()) {
            return Pos::NUM;
        }
        let (bare, _) = split_possessive(token);
        let lower = bare.to_lowercase();
        if is_number_word(&lower) {
            return Pos::NUM;
        }
        let lexical = self.word_tag(&lower);
        let verbal = self.verb(&lower).map(|_| {
            let nominal_context = matches!(prev, Some(Pos::DET | Pos::ADJ))
                || (matches!(prev, Some(Pos::ADP)) && prev_word != "to");
            if nominal_context && !lower.ends_with("ed") {
                Pos::NOUN
            } else {
                Pos::VERB
            }
        });
        if is_title_case(bare) {
            if is_sentence_start(tokens, i) {
                if let Some(tag) = lexical.filter(|t| *t != Pos::ADJ).or(verbal) {
                    return tag;
                }
            }
            return Pos::PROPN;
        }
        lexical.or(verbal).or_else(|| suffix_tag(&lower)).unwrap_or(Pos::NOUN)
    }
}

/// Read a two-column CoNLL-style `token<TAB>tag` file (blank lines ignored).
pub fn parse_pos_override(raw: &str) -> Result<Vec<(String, Pos)>> {
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (token, tag) = match (cols.next(), cols.next()) {
            (Some(t), Some(g)) => (t, g),
            _ => return Err(ForgeError::parse(format!("pos override line {}: expected token<TAB>tag", i + 1))),
        };
        out.push((token.to_string(), tag.parse()?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::token_strings;

    fn tags(s: &str) -> Vec<Pos> {
        PosLexicon::builtin().tag(&token_strings(s))
    }

    #[test]
    fn henderson_sentence() {
        use Pos::*;
        assert_eq!(
            tags("Peter Henderson produces only rock albums"),
            vec![PROPN, PROPN, VERB, ADV, NOUN, NOUN]
        );
    }

    #[test]
    fn digits_and_empty() {
        assert_eq!(tags("29"), vec![Pos::NUM]);
        assert!(tags("").is_empty());
    }

    #[test]
    fn table_hypotheses() {
        use Pos::*;
        assert_eq!(
            tags("Breakfast in America was released towards the end of 1979."),
            vec![PROPN, ADP, PROPN, AUX, VERB, ADP, DET, NOUN, ADP, NUM, PUNCT]
        );
        assert_eq!(
            tags("The genres of the album are pop and rock."),
            vec![DET, NOUN, ADP, DET, NOUN, AUX, ADJ, CCONJ, NOUN, PUNCT]
        );
        assert_eq!(tags("Supertramp is an English band."), vec![PROPN, AUX, DET, PROPN, NOUN, PUNCT]);
        assert_eq!(tags("produced by two producers"), vec![VERB, ADP, NUM, NOUN]);
    }

    #[test]
    fn verb_analysis() {
        let lex = PosLexicon::builtin();
        assert_eq!(lex.analyze_verb("produces"), ("produce".into(), VerbForm::ThirdSingular));
        assert_eq!(lex.analyze_verb("recorded"), ("record".into(), VerbForm::Past));
        assert_eq!(lex.analyze_verb("wrote"), ("write".into(), VerbForm::Past));
        assert_eq!(lex.analyze_verb("teaches"), ("teach".into(), VerbForm::ThirdSingular));
        assert_eq!(lex.analyze_verb("zorbled"), ("zorbl".into(), VerbForm::Past));
    }

    #[test]
    fn override_file() {
        let parsed = parse_pos_override("Peter\tPROPN\nruns\tVERB\n\n").unwrap();
        assert_eq!(parsed[1], ("runs".to_string(), Pos::VERB));
        assert!(parse_pos_override("x\tFOO\n").is_err());
    }
}

//! The atomic perturbations. Each returns the new text and the edits made,
//! or [`ForgeError::NoOp`] when the text offers nothing to change.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::gazetteer::is_month;
use crate::annotate::pos::VerbForm;
use crate::annotate::{Annotated, Entity, EntitySpan, Gazetteer, Pos, PosLexicon};
use crate::error::{ForgeError, Result};
use crate::perturb::rules::PerturbKind;
use crate::text::{capitalize_first, is_title_case, split_possessive, splice, tokenize};

pub const DEFAULT_CHAR_OPS: usize = 3;
pub const NUMBER_RANGE: (u32, u32) = (1, 3999);
pub const DAY_RANGE: (u32, u32) = (1, 28);

/// Replacement of `old` at byte range `start..end` of the op's input text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpDetail {
    pub kind: PerturbKind,
    pub edits: Vec<Edit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpOutput {
    pub text: String,
    pub detail: OpDetail,
}

pub(crate) fn finish(text: &str, kind: PerturbKind, edits: Vec<Edit>, notes: Vec<String>) -> Result<OpOutput> {
    let spliced: Vec<(usize, usize, String)> = edits.iter().map(|e| (e.start, e.end, e.new.clone())).collect();
    let out = splice(text, &spliced);
    if out == text {
        return Err(ForgeError::NoOp(format!("{kind}: text unchanged")));
    }
    Ok(OpOutput { text: out, detail: OpDetail { kind, edits, notes } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharEdit {
    Insert,
    Swap,
    Delete,
    Substitute,
}

impl CharEdit {
    pub fn name(self) -> &'static str {
        match self {
            CharEdit::Insert => "insert",
            CharEdit::Swap => "swap",
            CharEdit::Delete => "delete",
            CharEdit::Substitute => "substitute",
        }
    }
}

fn random_letter<R: Rng>(rng: &mut R, not: Option<char>) -> char {
    loop {
        let c = char::from(b'a' + rng.random_range(0..26u8));
        if Some(c.to_ascii_lowercase()) != not.map(|n| n.to_ascii_lowercase()) {
            return c;
        }
    }
}

/// Apply one random character edit to `word`. Swap, delete and substitute
/// only touch interior characters; inserts go between two characters.
fn edit_word<R: Rng>(word: &mut Vec<char>, rng: &mut R) -> CharEdit {
    let n = word.len();
    let swappable: Vec<usize> = (1..n.saturating_sub(2)).filter(|i| word[*i] != word[*i + 1]).collect();
    let mut options = vec![CharEdit::Insert];
    if !swappable.is_empty() {
        options.push(CharEdit::Swap);
    }
    if n >= 3 {
        options.push(CharEdit::Delete);
        options.push(CharEdit::Substitute);
    }
    let op = *options.choose(rng).expect("insert is always possible");
    match op {
        CharEdit::Insert => {
            let at = rng.random_range(1..n);
            word.insert(at, random_letter(rng, None));
        }
        CharEdit::Swap => {
            let i = *swappable.choose(rng).expect("non-empty");
            word.swap(i, i + 1);
        }
        CharEdit::Delete => {
            word.remove(rng.random_range(1..n - 1));
        }
        CharEdit::Substitute => {
            let i = rng.random_range(1..n - 1);
            word[i] = random_letter(rng, Some(word[i]));
        }
    }
    op
}

pub fn perturb_character(text: &str, seed: u64, n_ops: usize, protected: &[EntitySpan]) -> Result<OpOutput> {
    perturb_character_with(text, &mut ChaCha8Rng::seed_from_u64(seed), n_ops, protected)
}

/// `n_ops` random character edits on alphabetic words of ≥3 letters. Number
/// tokens and tokens inside `protected` spans are never touched; a
/// possessive suffix is left as is.
pub fn perturb_character_with<R: Rng>(text: &str, rng: &mut R, n_ops: usize, protected: &[EntitySpan]) -> Result<OpOutput> {
    if n_ops == 0 {
        return Err(ForgeError::validation("character perturbation needs n_ops ≥ 1"));
    }
    let tokens = tokenize(text);
    let shielded = |i: usize| protected.iter().any(|s| s.start <= i && i < s.end);
    let eligible: Vec<(usize, usize, Vec<char>)> = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !shielded(*i))
        .filter_map(|(_, t)| {
            let (stem, _) = split_possessive(&t.text);
            let chars: Vec<char> = stem.chars().collect();
            (chars.len() >= 3 && chars.iter().all(|c| c.is_alphabetic())).then(|| (t.start, t.start + stem.len(), chars))
        })
        .collect();
    if eligible.is_empty() {
        return Err(ForgeError::NoOp("character: no word of three or more letters".into()));
    }
    let mut words: Vec<Vec<char>> = eligible.iter().map(|e| e.2.clone()).collect();
    let mut notes = Vec::with_capacity(n_ops);
    for _ in 0..n_ops {
        let w = rng.random_range(0..eligible.len());
        // A later edit may undo an earlier one on the same word; keep going until it differs.
        loop {
            let op = edit_word(&mut words[w], rng);
            notes.push(format!("{}:{}", op.name(), eligible[w].2.iter().collect::<String>()));
            if words[w] != eligible[w].2 {
                break;
            }
        }
    }
    let edits = eligible
        .iter()
        .zip(&words)
        .filter(|(e, w)| e.2 != **w)
        .map(|((start, end, old), new)| Edit {
            start: *start,
            end: *end,
            old: old.iter().collect(),
            new: new.iter().collect(),
        })
        .collect();
    finish(text, PerturbKind::Character, edits, notes)
}

/// Replace every location span through the gazetteer's replacement map.
pub fn perturb_location(annotated: &Annotated, gazetteer: &Gazetteer) -> Result<OpOutput> {
    let mut edits = Vec::new();
    for span in annotated.spans_of(Entity::is_location) {
        let (start, end) = annotated.byte_range(span.start, span.end);
        let (stem, _) = split_possessive(&annotated.text[start..end]);
        if let Some(to) = gazetteer.replacement_map.get(stem) {
            edits.push(Edit { start, end: start + stem.len(), old: stem.to_string(), new: to.clone() });
        }
    }
    if edits.is_empty() {
        return Err(ForgeError::NoOp("location: no mapped location".into()));
    }
    finish(&annotated.text, PerturbKind::Location, edits, vec![])
}

/// Replace every person name with a different full name from `names`.
pub fn perturb_name<R: Rng>(annotated: &Annotated, names: &[String], rng: &mut R) -> Result<OpOutput> {
    let mut edits = Vec::new();
    for span in annotated.spans_of(|k| k == Entity::PersonName) {
        let (start, end) = annotated.byte_range(span.start, span.end);
        let (stem, _) = split_possessive(&annotated.text[start..end]);
        let choices: Vec<&String> = names.iter().filter(|n| n.as_str() != stem).collect();
        let Some(to) = choices.choose(rng) else {
            return Err(ForgeError::NoOp("name: no alternative name available".into()));
        };
        edits.push(Edit { start, end: start + stem.len(), old: stem.to_string(), new: (*to).clone() });
    }
    if edits.is_empty() {
        return Err(ForgeError::NoOp("name: no person name".into()));
    }
    finish(&annotated.text, PerturbKind::Name, edits, vec![])
}

/// Replace one uniformly chosen number with a different random integer.
/// Days next to a month stay within 1..=28.
pub fn perturb_number<R: Rng>(annotated: &Annotated, rng: &mut R) -> Result<OpOutput> {
    let numbers: Vec<&EntitySpan> = annotated.spans_of(|k| k == Entity::Number).collect();
    let Some(span) = numbers.choose(rng) else {
        return Err(ForgeError::NoOp("number: no number token".into()));
    };
    let i = span.start;
    let tok = &annotated.tokens[i];
    let value: u64 = tok.text.parse().unwrap_or(u64::MAX);
    let near_month = |j: Option<usize>| j.and_then(|j| annotated.tokens.get(j)).is_some_and(|t| is_month(&t.text));
    let is_day = value <= 31 && (near_month(i.checked_sub(1)) || near_month(Some(i + 1)));
    let (lo, hi) = if is_day { DAY_RANGE } else { NUMBER_RANGE };
    let new = loop {
        let v = rng.random_range(lo..=hi);
        if u64::from(v) != value {
            break v;
        }
    };
    let notes = if is_day { vec!["day".to_string()] } else { vec![] };
    let edit = Edit { start: tok.start, end: tok.end, old: tok.text.clone(), new: new.to_string() };
    finish(&annotated.text, PerturbKind::Number, vec![edit], notes)
}

/// Finite auxiliaries, copulas and modals that take "not" directly after them.
pub const NEGATABLE_AUXILIARIES: [&str; 21] = [
    "am", "is", "are", "was", "were", "do", "does", "did", "has", "have", "had", "can", "could", "will", "would",
    "shall", "should", "may", "might", "must", "ought",
];

/// Negate at the first site: "not" after an auxiliary, or do-support for a
/// finite main verb ("produces" → "does not produce").
pub fn perturb_negation(annotated: &Annotated, lexicon: &PosLexicon) -> Result<OpOutput> {
    let already = annotated.tokens.iter().any(|t| {
        let l = t.text.to_lowercase();
        l == "not" || l.ends_with("n't") || l.ends_with("n’t")
    });
    if already {
        return Err(ForgeError::NoOp("negation: sentence is already negated".into()));
    }
    for (i, tok) in annotated.tokens.iter().enumerate() {
        let lower = tok.text.to_lowercase();
        // "May" the month is not the modal
        if NEGATABLE_AUXILIARIES.contains(&lower.as_str()) && tok.text != "May" {
            let edit = Edit { start: tok.end, end: tok.end, old: String::new(), new: " not".into() };
            return finish(&annotated.text, PerturbKind::Negation, vec![edit], vec![format!("after:{}", tok.text)]);
        }
        if annotated.annotations[i].pos == Pos::VERB {
            let (lemma, form) = lexicon.analyze_verb(&tok.text);
            let aux = match form {
                VerbForm::ThirdSingular => "does",
                VerbForm::Past => "did",
                VerbForm::Base => "do",
                VerbForm::PastParticiple | VerbForm::Gerund => continue,
            };
            let mut new = format!("{aux} not {lemma}");
            if is_title_case(&tok.text) {
                new = capitalize_first(&new);
            }
            let edit = Edit { start: tok.start, end: tok.end, old: tok.text.clone(), new };
            return finish(&annotated.text, PerturbKind::Negation, vec![edit], vec![format!("do-support:{}", tok.text)]);
        }
    }
    Err(ForgeError::NoOp("negation: no auxiliary or finite verb".into()))
}

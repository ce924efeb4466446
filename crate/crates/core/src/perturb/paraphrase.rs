use std::collections::BTreeMap;

use crate::annotate::{Annotated, Pos};
use crate::error::{ForgeError, Result};
use crate::perturb::ops::{finish, Edit, OpOutput};
use crate::perturb::rules::PerturbKind;
use crate::text::capitalize_first;

/// Prepositions that can open a frontable trailing phrase.
pub const FRONTING_PREPOSITIONS: [&str; 12] =
    ["in", "on", "at", "during", "after", "before", "since", "until", "from", "through", "throughout", "around"];

/// Precomputed paraphrases keyed by hypothesis id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParaphraseMap {
    entries: BTreeMap<String, String>,
}

impl ParaphraseMap {
    /// TSV `hyp_id<TAB>paraphrase`; an optional `hyp_id` header line is skipped.
    pub fn from_tsv(raw: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in raw.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (i == 0 && line.starts_with("hyp_id\t")) {
                continue;
            }
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| ForgeError::parse(format!("paraphrase map line {}: expected hyp_id<TAB>paraphrase", i + 1)))?;
            if text.trim().is_empty() {
                return Err(ForgeError::validation(format!("paraphrase map line {}: empty paraphrase", i + 1)));
            }
            entries.insert(id.to_string(), text.to_string());
        }
        Ok(ParaphraseMap { entries })
    }

    pub fn insert(&mut self, hyp_id: impl Into<String>, paraphrase: impl Into<String>) {
        self.entries.insert(hyp_id.into(), paraphrase.into());
    }

    pub fn get(&self, hyp_id: &str) -> Option<&str> {
        self.entries.get(hyp_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ParaphraseProvider {
    /// Leaves text unchanged, so every use is a no-op. For tests.
    Identity,
    FileMap(ParaphraseMap),
    #[default]
    RuleFronting,
}

/// Paraphrase `annotated.text`.
///
/// A file-map paraphrase belongs to the original hypothesis, so substitutions
/// made by earlier ops (`prior`) are replayed on it; if one cannot be
/// replayed the op is a no-op.
pub fn perturb_paraphrase(annotated: &Annotated, hyp_id: &str, provider: &ParaphraseProvider, prior: &[Edit]) -> Result<OpOutput> {
    let text = &annotated.text;
    let new = match provider {
        ParaphraseProvider::Identity => text.clone(),
        ParaphraseProvider::FileMap(map) => {
            let mut para = map
                .get(hyp_id)
                .ok_or_else(|| ForgeError::NoOp(format!("paraphrase: no entry for {hyp_id}")))?
                .to_string();
            for e in prior {
                if e.old.is_empty() || !para.contains(&e.old) {
                    return Err(ForgeError::NoOp(format!("paraphrase: cannot carry edit {:?} → {:?}", e.old, e.new)));
                }
                para = para.replacen(&e.old, &e.new, 1);
            }
            para
        }
        ParaphraseProvider::RuleFronting => front_trailing_phrase(annotated)?,
    };
    let edit = Edit { start: 0, end: text.len(), old: text.clone(), new };
    finish(text, PerturbKind::Paraphrase, vec![edit], vec![])
}

/// "X was recorded in the last half of 1979." → "In the last half of 1979, x was recorded."
fn front_trailing_phrase(a: &Annotated) -> Result<String> {
    let no_rule = || ForgeError::NoOp("paraphrase: no trailing prepositional phrase".into());
    let toks = &a.tokens;
    let end = match toks.last() {
        Some(t) if matches!(t.text.as_str(), "." | "!" | "?") => toks.len() - 1,
        Some(_) => toks.len(),
        None => return Err(no_rule()),
    };
    let last_verb = (0..end).rev().find(|i| matches!(a.annotations[*i].pos, Pos::VERB | Pos::AUX)).ok_or_else(no_rule)?;
    let j = (last_verb + 1..end)
        .find(|i| FRONTING_PREPOSITIONS.contains(&toks[*i].text.as_str()))
        .ok_or_else(no_rule)?;
    if end - j < 2 || toks[j..end].iter().any(|t| t.text == ",") {
        return Err(no_rule());
    }
    let phrase = &a.text[toks[j].start..toks[end - 1].end];
    let mut rest = a.text[toks[0].start..toks[j - 1].end].to_string();
    if a.annotations[0].pos != Pos::PROPN {
        let mut chars = rest.chars();
        if let Some(c) = chars.next() {
            rest = c.to_lowercase().chain(chars).collect();
        }
    }
    let tail = if end < toks.len() { &a.text[toks[end].start..] } else { "" };
    Ok(format!("{}, {rest}{tail}", capitalize_first(phrase)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Annotator;

    fn ann(s: &str) -> Annotated {
        Annotator::builtin().annotate(s)
    }

    #[test]
    fn fronting_rule() {
        let out = perturb_paraphrase(&ann("The album was recorded in the last half of 1979."), "h", &ParaphraseProvider::RuleFronting, &[]).unwrap();
        assert_eq!(out.text, "In the last half of 1979, the album was recorded.");
        let out = perturb_paraphrase(&ann("Supertramp played in London."), "h", &ParaphraseProvider::RuleFronting, &[]).unwrap();
        assert_eq!(out.text, "In London, Supertramp played.");
        assert!(perturb_paraphrase(&ann("Peter Henderson produces only rock albums."), "h", &ParaphraseProvider::RuleFronting, &[]).is_err());
    }

    #[test]
    fn file_map_and_identity() {
        let map = ParaphraseMap::from_tsv("hyp_id\tparaphrase\nh6\tIn the second part of 1979, the album was recorded.\n").unwrap();
        let p = ParaphraseProvider::FileMap(map);
        let a = ann("The album was recorded in the last half of 1979.");
        assert_eq!(perturb_paraphrase(&a, "h6", &p, &[]).unwrap().text, "In the second part of 1979, the album was recorded.");
        assert!(matches!(perturb_paraphrase(&a, "h7", &p, &[]), Err(ForgeError::NoOp(_))));
        assert!(matches!(perturb_paraphrase(&a, "h6", &ParaphraseProvider::Identity, &[]), Err(ForgeError::NoOp(_))));
    }

    #[test]
    fn file_map_replays_prior_edits() {
        let mut map = ParaphraseMap::default();
        map.insert("h", "In the second part of 1979, the album was recorded.");
        let prior = [Edit { start: 0, end: 0, old: "1979".into(), new: "1278".into() }];
        let a = ann("The album was recorded in the last half of 1278.");
        let out = perturb_paraphrase(&a, "h", &ParaphraseProvider::FileMap(map.clone()), &prior).unwrap();
        assert_eq!(out.text, "In the second part of 1278, the album was recorded.");
        let bad = [Edit { start: 0, end: 0, old: "1980".into(), new: "5".into() }];
        assert!(perturb_paraphrase(&a, "h", &ParaphraseProvider::FileMap(map), &bad).is_err());
    }

    #[test]
    fn map_parse_errors() {
        assert!(ParaphraseMap::from_tsv("h1 no tab\n").is_err());
        assert!(ParaphraseMap::from_tsv("h1\t \n").is_err());
    }
}

//! Offline synonym lexicon.

use std::collections::{BTreeSet, HashMap};

use crate::error::{ForgeError, Result};

/// Symmetric synonym relation loaded from `word<TAB>syn1,syn2,...`.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    relation: HashMap<String, BTreeSet<String>>,
}

impl SynonymLexicon {
    pub fn from_tsv(raw: &str) -> Result<Self> {
        let mut lex = SynonymLexicon::default();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| ForgeError::parse(format!("synonym line {}: expected word<TAB>synonyms", i + 1)))?;
            let word = word.trim().to_lowercase();
            if word.is_empty() {
                return Err(ForgeError::parse(format!("synonym line {}: empty headword", i + 1)));
            }
            for syn in syns.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()) {
                if syn != word {
                    lex.relation.entry(word.clone()).or_default().insert(syn.clone());
                    lex.relation.entry(syn).or_default().insert(word.clone());
                }
            }
        }
        Ok(lex)
    }

    pub fn builtin() -> Self {
        SynonymLexicon::from_tsv(include_str!("../../data/synonyms.tsv")).expect("built-in synonym lexicon is valid")
    }

    /// Lowercased synonyms of `word`, always including the word itself.
    pub fn synonyms(&self, word: &str) -> Result<BTreeSet<String>> {
        let key = word.trim().to_lowercase();
        if key.is_empty() {
            return Err(ForgeError::Conversion("synonyms of an empty word".into()));
        }
        let mut out = self.relation.get(&key).cloned().unwrap_or_default();
        out.insert(key);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.relation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relation.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.relation.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn released_has_lexicon_synonyms() {
        let syn = SynonymLexicon::builtin().synonyms("released").unwrap();
        assert!(syn.contains("released"));
        assert!(syn.contains("issued"));
    }

    #[test]
    fn unknown_and_empty() {
        let lex = SynonymLexicon::builtin();
        assert_eq!(lex.synonyms("zzxq").unwrap().into_iter().collect::<Vec<_>>(), vec!["zzxq"]);
        assert!(matches!(lex.synonyms(""), Err(ForgeError::Conversion(_))));
    }

    #[test]
    fn relation_is_symmetric() {
        let lex = SynonymLexicon::builtin();
        for (word, syns) in lex.iter() {
            for s in syns {
                assert!(lex.synonyms(s).unwrap().contains(word), "{s} ↛ {word}");
            }
        }
    }
}

//! Deterministic linguistic services: tokenization, POS tags, gazetteer
//! entities, numeral conversion and synonym lookup.

pub mod gazetteer;
pub mod lexicon;
pub mod numeral;
pub mod pos;

use serde::{Deserialize, Serialize};

pub use gazetteer::{entity_labels, Entity, EntitySpan, Gazetteer};
pub use lexicon::SynonymLexicon;
pub use numeral::{normalize_numeral, Direction};
pub use pos::{Pos, PosLexicon, VerbForm};

use crate::error::{ForgeError, Result};
use crate::text::{tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub token: String,
    pub pos: Pos,
    pub entity: Entity,
}

/// Tag tokens with the built-in tagger, or copy tags from an external annotation.
pub fn pos_tag(
    lexicon: &PosLexicon,
    tokens: &[String],
    override_tags: Option<&[(String, Pos)]>,
) -> Result<Vec<TokenAnnotation>> {
    let tags: Vec<Pos> = match override_tags {
        Some(ext) => {
            if ext.len() != tokens.len() {
                return Err(ForgeError::validation(format!(
                    "POS override has {} tags for {} tokens",
                    ext.len(),
                    tokens.len()
                )));
            }
            ext.iter().map(|(_, p)| *p).collect()
        }
        None => lexicon.tag(tokens),
    };
    Ok(tokens
        .iter()
        .zip(tags)
        .map(|(t, pos)| TokenAnnotation { token: t.clone(), pos, entity: Entity::None })
        .collect())
}

/// A sentence with tokens, tags and entity spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotated {
    pub text: String,
    pub tokens: Vec<Token>,
    pub annotations: Vec<TokenAnnotation>,
    pub spans: Vec<EntitySpan>,
}

impl Annotated {
    pub fn token_strings(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    pub fn spans_of(&self, pred: impl Fn(Entity) -> bool) -> impl Iterator<Item = &EntitySpan> {
        self.spans.iter().filter(move |s| pred(s.kind))
    }

    /// Byte range of a token span in `text`.
    pub fn byte_range(&self, start: usize, end: usize) -> (usize, usize) {
        (self.tokens[start].start, self.tokens[end - 1].end)
    }
}

/// Bundles the read-only linguistic resources.
#[derive(Debug, Clone)]
pub struct Annotator {
    pub lexicon: PosLexicon,
    pub gazetteer: Gazetteer,
    pub synonyms: SynonymLexicon,
}

impl Default for Annotator {
    fn default() -> Self {
        Annotator::builtin()
    }
}

impl Annotator {
    pub fn builtin() -> Self {
        Annotator {
            lexicon: PosLexicon::builtin(),
            gazetteer: Gazetteer::builtin(),
            synonyms: SynonymLexicon::builtin(),
        }
    }

    pub fn annotate(&self, text: &str) -> Annotated {
        self.annotate_with(text, None).expect("built-in tagging is total")
    }

    pub fn annotate_with(&self, text: &str, override_tags: Option<&[(String, Pos)]>) -> Result<Annotated> {
        let tokens = tokenize(text);
        let strings: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
        let mut annotations = pos_tag(&self.lexicon, &strings, override_tags)?;
        let spans = self.gazetteer.find_entities(&tokens);
        for (a, e) in annotations.iter_mut().zip(entity_labels(tokens.len(), &spans)) {
            a.entity = e;
        }
        Ok(Annotated { text: text.to_string(), tokens, annotations, spans })
    }
}

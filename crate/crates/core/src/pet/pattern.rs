use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotate::pos::MASK_TOKEN;
use crate::error::{ForgeError, Result};
use crate::label::Label;
use crate::text::token_strings;

/// Label → verbalizer token. Fixed to Yes / Maybe / No.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizers(pub BTreeMap<Label, String>);

impl Default for Verbalizers {
    fn default() -> Self {
        Verbalizers(Label::ALL.iter().map(|l| (*l, l.verbalizer().to_string())).collect())
    }
}

impl Verbalizers {
    pub fn token(&self, label: Label) -> &str {
        &self.0[&label]
    }

    /// Tokens in E, N, C order.
    pub fn ordered(&self) -> [&str; 3] {
        Label::ALL.map(|l| self.token(l))
    }
}

/// `<premise> ? <mask> , <hypothesis>` as a token stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub id: String,
    pub tokens: Vec<String>,
    pub label_mask_position: usize,
    pub verbalizers: Verbalizers,
    pub gold: Label,
}

impl ClozeInstance {
    /// Positions of the `?`, mask and `,` tokens that make up the pattern.
    pub fn skeleton_positions(&self) -> [usize; 3] {
        let p = self.label_mask_position;
        [p - 1, p, p + 1]
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Tokens with the label slot filled by `label`'s verbalizer.
    pub fn conditioned_tokens(&self, label: Label) -> Vec<String> {
        let mut t = self.tokens.clone();
        t[self.label_mask_position] = self.verbalizers.token(label).to_string();
        t
    }
}

pub fn build_pattern(premise: &str, hypothesis: &str, gold: Label) -> Result<ClozeInstance> {
    if premise.trim().is_empty() {
        return Err(ForgeError::validation("cloze pattern: empty premise"));
    }
    if hypothesis.trim().is_empty() {
        return Err(ForgeError::validation("cloze pattern: empty hypothesis"));
    }
    let mut tokens = token_strings(premise);
    tokens.push("?".into());
    let label_mask_position = tokens.len();
    tokens.push(MASK_TOKEN.into());
    tokens.push(",".into());
    tokens.extend(token_strings(hypothesis));
    Ok(ClozeInstance {
        id: String::new(),
        tokens,
        label_mask_position,
        verbalizers: Verbalizers::default(),
        gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_layout() {
        let c = build_pattern("P", "H", Label::Entailment).unwrap();
        assert_eq!(c.tokens, vec!["P", "?", "<mask>", ",", "H"]);
        assert_eq!(c.label_mask_position, 2);
        assert_eq!(c.verbalizers.token(Label::Entailment), "Yes");
        assert_eq!(c.verbalizers.ordered(), ["Yes", "Maybe", "No"]);
    }

    #[test]
    fn empty_premise_rejected() {
        assert!(matches!(build_pattern(" ", "H", Label::Neutral), Err(ForgeError::Validation(_))));
    }

    #[test]
    fn text_is_label_independent() {
        let e = build_pattern("P", "H", Label::Entailment).unwrap();
        let c = build_pattern("P", "H", Label::Contradiction).unwrap();
        assert_eq!(e.tokens, c.tokens);
        assert_eq!(c.gold, Label::Contradiction);
    }
}

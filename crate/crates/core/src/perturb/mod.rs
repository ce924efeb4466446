//! Adversarial hypothesis perturbations with label bookkeeping.

pub mod ops;
pub mod paraphrase;
pub mod rules;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ops::{
    perturb_character, perturb_character_with, perturb_location, perturb_name, perturb_negation, perturb_number, Edit,
    OpDetail, OpOutput, DEFAULT_CHAR_OPS,
};
pub use paraphrase::{perturb_paraphrase, ParaphraseMap, ParaphraseProvider};
pub use rules::{fold_labels, parse_kinds, transition_label, PerturbKind, Transition, TransitionRule};

use crate::annotate::{Annotated, Annotator};
use crate::corpus::{Pair, PairRef};
use crate::error::{ForgeError, Result};
use crate::label::Label;
use crate::rng::keyed_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub pair_ref: PairRef,
    pub original_text: String,
    pub perturbed_text: String,
    pub ops: Vec<PerturbKind>,
    pub details: Vec<OpDetail>,
    pub original_label: Label,
    pub new_label: Transition,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<String>,
}

impl PerturbationRecord {
    pub fn is_dropped(&self) -> bool {
        self.new_label == Transition::Drop
    }
}

pub fn parse_names(raw: &str) -> Vec<String> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect()
}

pub fn builtin_names() -> Vec<String> {
    parse_names(include_str!("../../data/gazetteer/names.txt"))
}

/// Resources and settings shared by all perturbations of a run.
#[derive(Debug, Clone)]
pub struct Perturber {
    pub annotator: Annotator,
    pub names: Vec<String>,
    pub paraphrase: ParaphraseProvider,
    pub rules: TransitionRule,
    pub char_ops: usize,
}

impl Default for Perturber {
    fn default() -> Self {
        Perturber::builtin()
    }
}

/// Result of perturbing a batch: kept records and dropped ones, each in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PerturbSet {
    pub kept: Vec<PerturbationRecord>,
    pub dropped: Vec<PerturbationRecord>,
}

impl Perturber {
    pub fn builtin() -> Self {
        Perturber {
            annotator: Annotator::builtin(),
            names: builtin_names(),
            paraphrase: ParaphraseProvider::default(),
            rules: TransitionRule::default(),
            char_ops: DEFAULT_CHAR_OPS,
        }
    }

    fn apply<R: rand::Rng>(&self, kind: PerturbKind, a: &Annotated, hyp_id: &str, rng: &mut R, prior: &[Edit]) -> Result<OpOutput> {
        match kind {
            PerturbKind::Character => perturb_character_with(&a.text, rng, self.char_ops, &a.spans),
            PerturbKind::Location => perturb_location(a, &self.annotator.gazetteer),
            PerturbKind::Name => perturb_name(a, &self.names, rng),
            PerturbKind::Number => perturb_number(a, rng),
            PerturbKind::Negation => perturb_negation(a, &self.annotator.lexicon),
            PerturbKind::Paraphrase => perturb_paraphrase(a, hyp_id, &self.paraphrase, prior),
        }
    }

    /// Apply `kinds` left to right and fold the label rules alongside. A no-op
    /// step or a dropping transition yields a record labelled `dropped`.
    pub fn compose(&self, pair_ref: &PairRef, text: &str, label: Label, kinds: &[PerturbKind], seed: u64) -> Result<PerturbationRecord> {
        if kinds.is_empty() {
            return Err(ForgeError::validation("compose needs at least one perturbation kind"));
        }
        if kinds.iter().collect::<BTreeSet<_>>().len() != kinds.len() {
            return Err(ForgeError::validation("perturbation kinds must be distinct"));
        }
        let mut rng = keyed_rng(seed, &pair_ref.to_string());
        let mut record = PerturbationRecord {
            pair_ref: pair_ref.clone(),
            original_text: text.to_string(),
            perturbed_text: text.to_string(),
            ops: kinds.to_vec(),
            details: Vec::new(),
            original_label: label,
            new_label: fold_labels(label, kinds, &self.rules),
            seed,
            drop_reason: None,
        };
        let mut prior: Vec<Edit> = Vec::new();
        for kind in kinds {
            let a = self.annotator.annotate(&record.perturbed_text);
            match self.apply(*kind, &a, &pair_ref.hyp_id, &mut rng, &prior) {
                Ok(out) => {
                    if *kind != PerturbKind::Paraphrase {
                        prior.extend(out.detail.edits.iter().cloned());
                    }
                    record.perturbed_text = out.text;
                    record.details.push(out.detail);
                }
                Err(ForgeError::NoOp(reason)) => {
                    record.new_label = Transition::Drop;
                    record.drop_reason = Some(reason);
                    return Ok(record);
                }
                Err(e) => return Err(e),
            }
        }
        if record.is_dropped() {
            record.drop_reason = Some("label transition is undefined".into());
        }
        Ok(record)
    }

    pub fn compose_pair(&self, pair: &Pair, kinds: &[PerturbKind], seed: u64) -> Result<PerturbationRecord> {
        self.compose(&pair.pair_ref(), &pair.hypothesis.text, pair.hypothesis.label, kinds, seed)
    }

    /// Perturb every pair in parallel; output order follows input order.
    pub fn perturb_set(&self, pairs: &[Pair], kinds: &[PerturbKind], seed: u64) -> Result<PerturbSet> {
        let records: Vec<PerturbationRecord> =
            pairs.par_iter().map(|p| self.compose_pair(p, kinds, seed)).collect::<Result<_>>()?;
        let (dropped, kept) = records.into_iter().partition(PerturbationRecord::is_dropped);
        Ok(PerturbSet { kept, dropped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(h: &str) -> PairRef {
        PairRef { table_id: "T1".into(), hyp_id: h.into() }
    }

    #[test]
    fn number_paraphrase_name() {
        let mut p = Perturber::builtin();
        p.names = vec!["John Doe".into()];
        let mut map = ParaphraseMap::default();
        map.insert("h9", "The album by Peter Henderson was recorded in 1979.");
        p.paraphrase = ParaphraseProvider::FileMap(map);
        let kinds = parse_kinds("number,paraphrase,name").unwrap();
        let r = p.compose(&pr("h9"), "Peter Henderson's album was recorded in 1979.", Label::Entailment, &kinds, 4).unwrap();
        assert_eq!(r.new_label, Transition::To(Label::Neutral));
        assert!(r.perturbed_text.starts_with("The album by John Doe was recorded in "));
        assert!(!r.perturbed_text.ends_with(" 1979."));
        assert_eq!(r.details.len(), 3);
    }

    #[test]
    fn noop_drops() {
        let p = Perturber::builtin();
        let r = p.compose(&pr("h"), "It is a pop album.", Label::Entailment, &[PerturbKind::Location], 0).unwrap();
        assert!(r.is_dropped());
        assert!(r.drop_reason.unwrap().starts_with("location"));
    }

    #[test]
    fn negated_contradiction_dropped() {
        let p = Perturber::builtin();
        let r = p.compose(&pr("h"), "The album is pop.", Label::Contradiction, &[PerturbKind::Negation], 0).unwrap();
        assert!(r.is_dropped());
        assert_eq!(r.perturbed_text, "The album is not pop.");
    }

    #[test]
    fn kinds_must_be_distinct() {
        let p = Perturber::builtin();
        let k = [PerturbKind::Name, PerturbKind::Name];
        assert!(matches!(p.compose(&pr("h"), "x", Label::Entailment, &k, 0), Err(ForgeError::Validation(_))));
        assert!(p.compose(&pr("h"), "x", Label::Entailment, &[], 0).is_err());
    }

    #[test]
    fn record_json_shape() {
        let p = Perturber::builtin();
        let r = p.compose(&pr("h"), "Peter Henderson produces only rock albums.", Label::Neutral, &[PerturbKind::Character], 5).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["new_label"], "N");
        assert_eq!(v["ops"][0], "character");
        assert_eq!(v["pair_ref"]["hyp_id"], "h");
    }
}

//! File boundary to an external scorer: masked batches out, logits in.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::annotate::{pos_tag, PosLexicon};
use crate::error::{ForgeError, Result};
use crate::label::Label;
use crate::pet::loss::{decoupled_label_loss, label_conditioned_mlm_loss, predict_from_row, LogitView};
use crate::pet::masking::{sample_cwwm_masks, sample_token_masks, MaskPlan, MaskStrategy};
use crate::pet::pattern::{ClozeInstance, Verbalizers};
use crate::pet::toy::Vocab;
use crate::rng::keyed_rng;

/// One exported instance. `tokens` keep the mask in the label slot and the
/// original words at the context positions; the consumer masks those and
/// writes `condition` into the label slot for the MLM pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub label_mask_position: usize,
    pub context_mask_positions: Vec<usize>,
    pub verbalizers: Verbalizers,
    pub gold: Label,
    pub condition: String,
    pub condition_correct: bool,
    pub strategy: MaskStrategy,
}

/// Draw the context mask for an instance. CWWM falls back to token masking
/// when whole words cannot reach the rate.
pub fn plan_context_mask(inst: &ClozeInstance, lexicon: &PosLexicon, strategy: MaskStrategy, ratio: f64, seed: u64) -> Result<MaskPlan> {
    let protected: BTreeSet<usize> = inst.skeleton_positions().into_iter().collect();
    match strategy {
        MaskStrategy::Token => sample_token_masks(inst.tokens.len(), ratio, seed, &protected),
        MaskStrategy::Cwwm => {
            let anns = pos_tag(lexicon, &inst.tokens, None)?;
            match sample_cwwm_masks(&inst.tokens, &anns, ratio, seed) {
                Err(ForgeError::FallbackToTokenMasking(_)) => sample_token_masks(inst.tokens.len(), ratio, seed, &protected),
                other => other,
            }
        }
    }
}

pub fn export_instance(inst: &ClozeInstance, lexicon: &PosLexicon, strategy: MaskStrategy, ratio: f64, seed: u64) -> Result<BatchRecord> {
    let plan = plan_context_mask(inst, lexicon, strategy, ratio, seed)?;
    let mut rng = keyed_rng(seed, &inst.id);
    let condition = *Label::ALL.choose(&mut rng).expect("three labels");
    Ok(BatchRecord {
        id: inst.id.clone(),
        tokens: inst.tokens.clone(),
        label_mask_position: inst.label_mask_position,
        context_mask_positions: plan.masked_positions,
        verbalizers: inst.verbalizers.clone(),
        gold: inst.gold,
        condition: inst.verbalizers.token(condition).to_string(),
        condition_correct: condition == inst.gold,
        strategy: plan.strategy,
    })
}

/// Vocabulary logits for the queried positions of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord {
    pub id: String,
    pub positions: Vec<usize>,
    pub logits: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub id: String,
    pub gold: Label,
    pub predicted: Label,
    pub label_loss: f64,
    /// Absent when the logit record carries no context positions.
    pub mlm_loss: Option<f64>,
}

pub fn score_record(batch: &BatchRecord, logits: &LogitRecord, vocab: &Vocab) -> Result<InstanceScore> {
    if logits.positions.len() != logits.logits.len() {
        return Err(ForgeError::validation(format!("{}: {} positions but {} logit rows", batch.id, logits.positions.len(), logits.logits.len())));
    }
    let rows: BTreeMap<usize, &Vec<f64>> = logits.positions.iter().copied().zip(&logits.logits).collect();
    let label_row = rows
        .get(&batch.label_mask_position)
        .ok_or_else(|| ForgeError::validation(format!("{}: no logits for the label slot", batch.id)))?;
    if label_row.len() != vocab.len() {
        return Err(ForgeError::validation(format!("{}: logit row has {} entries for a vocabulary of {}", batch.id, label_row.len(), vocab.len())));
    }
    let ids = vocab.verbalizer_ids(&batch.verbalizers)?;
    let label_loss = decoupled_label_loss(label_row, ids, batch.gold)?;
    let predicted = predict_from_row(label_row, ids);
    let ctx: Vec<usize> = batch.context_mask_positions.iter().copied().filter(|p| rows.contains_key(p)).collect();
    let mlm_loss = if ctx.is_empty() {
        None
    } else {
        let view = LogitView::new(ctx.iter().map(|p| rows[p].clone()).collect())?;
        let originals: Vec<usize> = ctx
            .iter()
            .map(|p| {
                let t = &batch.tokens[*p];
                vocab.id(t).ok_or_else(|| ForgeError::validation(format!("{}: token {t:?} not in vocabulary", batch.id)))
            })
            .collect::<Result<_>>()?;
        Some(label_conditioned_mlm_loss(&view, &originals, batch.condition_correct)?)
    };
    Ok(InstanceScore { id: batch.id.clone(), gold: batch.gold, predicted, label_loss, mlm_loss })
}

/// Score every batch record that has logits; records without logits are reported by id.
pub fn score_batches(batches: &[BatchRecord], logits: &[LogitRecord], vocab: &Vocab) -> Result<(Vec<InstanceScore>, Vec<String>)> {
    let by_id: BTreeMap<&str, &LogitRecord> = logits.iter().map(|l| (l.id.as_str(), l)).collect();
    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for b in batches {
        match by_id.get(b.id.as_str()) {
            Some(l) => scores.push(score_record(b, l, vocab)?),
            None => missing.push(b.id.clone()),
        }
    }
    Ok((scores, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pet::pattern::build_pattern;

    fn instance() -> ClozeInstance {
        let mut c = build_pattern(
            "The genre of Breakfast in America is Pop, art rock, soft rock.",
            "Peter Henderson produces only rock albums.",
            Label::Neutral,
        )
        .unwrap();
        c.id = "T1/h2".into();
        c
    }

    #[test]
    fn export_protects_skeleton() {
        let lex = PosLexicon::builtin();
        let c = instance();
        for strategy in [MaskStrategy::Token, MaskStrategy::Cwwm] {
            for seed in 0..20 {
                let r = export_instance(&c, &lex, strategy, 0.15, seed).unwrap();
                assert!(r.context_mask_positions.iter().all(|p| !c.skeleton_positions().contains(p)));
                assert_eq!(r.tokens[r.label_mask_position], "<mask>");
                assert_eq!(r.condition_correct, r.condition == "Maybe");
                assert_eq!(r, export_instance(&c, &lex, strategy, 0.15, seed).unwrap());
            }
        }
    }

    #[test]
    fn scoring_round_trip() {
        let lex = PosLexicon::builtin();
        let c = instance();
        let vocab = Vocab::from_tokens(c.tokens.iter().map(String::as_str));
        let r = export_instance(&c, &lex, MaskStrategy::Token, 0.15, 1).unwrap();
        let mut positions = vec![r.label_mask_position];
        positions.extend(&r.context_mask_positions);
        let logits = LogitRecord { id: r.id.clone(), logits: vec![vec![0.0; vocab.len()]; positions.len()], positions };
        let s = score_record(&r, &logits, &vocab).unwrap();
        assert_eq!(s.predicted, Label::Entailment);
        assert!(s.mlm_loss.is_some());
        let (scores, missing) = score_batches(std::slice::from_ref(&r), &[], &vocab).unwrap();
        assert!(scores.is_empty() && missing == vec![r.id.clone()]);
        let short = LogitRecord { id: r.id.clone(), positions: vec![r.label_mask_position], logits: vec![vec![0.0; 3]] };
        assert!(matches!(score_record(&r, &short, &vocab), Err(ForgeError::Validation(_))));
    }
}

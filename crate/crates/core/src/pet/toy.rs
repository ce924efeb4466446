//! Desk-scale trainable scorer: a bag of token embeddings projected to
//! vocabulary logits, trained with the decoupled label loss plus
//! label-conditioned MLM by full-batch gradient descent.

use std::collections::{BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotate::pos::MASK_TOKEN;
use crate::error::{ForgeError, Result};
use crate::label::Label;
use crate::pet::loss::{decoupled_label_loss_with_grad, mlm_position_loss, predict_from_row};
use crate::pet::masking::{sample_token_masks, DEFAULT_MASK_RATIO};
use crate::pet::pattern::{build_pattern, ClozeInstance, Verbalizers};

pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const SPECIALS: [&'static str; 5] = [UNK_TOKEN, MASK_TOKEN, "Yes", "Maybe", "No"];

    /// Specials first, then tokens in first-appearance order.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocab { tokens: Vec::new(), index: HashMap::new() };
        for t in Vocab::SPECIALS.into_iter().chain(tokens) {
            if !vocab.index.contains_key(t) {
                vocab.index.insert(t.to_string(), vocab.tokens.len());
                vocab.tokens.push(t.to_string());
            }
        }
        vocab
    }

    pub fn from_instances(instances: &[ClozeInstance]) -> Self {
        Vocab::from_tokens(instances.iter().flat_map(|i| i.tokens.iter().map(String::as_str)))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(self.index[UNK_TOKEN])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn verbalizer_ids(&self, verbalizers: &Verbalizers) -> Result<[usize; 3]> {
        let mut ids = [0; 3];
        for (slot, token) in ids.iter_mut().zip(verbalizers.ordered()) {
            *slot = self
                .id(token)
                .ok_or_else(|| ForgeError::validation(format!("verbalizer {token:?} not in vocabulary")))?;
        }
        Ok(ids)
    }

    /// One token per line; the id is the line index.
    pub fn from_lines(raw: &str) -> Result<Self> {
        let mut vocab = Vocab { tokens: Vec::new(), index: HashMap::new() };
        for line in raw.lines() {
            let t = line.trim_end_matches('\r');
            if vocab.index.insert(t.to_string(), vocab.tokens.len()).is_some() {
                return Err(ForgeError::validation(format!("duplicate vocabulary entry {t:?}")));
            }
            vocab.tokens.push(t.to_string());
        }
        if vocab.tokens.len() < 3 {
            return Err(ForgeError::validation("vocabulary needs at least 3 entries"));
        }
        Ok(vocab)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyScorerConfig {
    pub vocab: Vec<String>,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub mask_ratio: f64,
}

impl Default for ToyScorerConfig {
    fn default() -> Self {
        ToyScorerConfig {
            vocab: Vec::new(),
            embed_dim: 16,
            learning_rate: 1.0,
            steps: 300,
            seed: 0,
            mask_ratio: DEFAULT_MASK_RATIO,
        }
    }
}

/// Context-masked inputs for one instance under a correct and a wrong label.
#[derive(Debug, Clone, PartialEq)]
pub struct MlmExample {
    pub correct_input: Vec<usize>,
    pub wrong_input: Vec<usize>,
    pub originals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    /// Token ids with the label slot masked.
    pub label_input: Vec<usize>,
    pub verbalizer_ids: [usize; 3],
    pub gold: Label,
    pub mlm: Option<MlmExample>,
}

fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Resolve instances to id sequences and draw their context masks.
pub fn prepare_examples(instances: &[ClozeInstance], vocab: &Vocab, mask_ratio: f64, seed: u64) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::with_capacity(instances.len());
    let mask_id = vocab.id(MASK_TOKEN).ok_or_else(|| ForgeError::validation("vocabulary lacks <mask>"))?;
    for (n, inst) in instances.iter().enumerate() {
        let ids: Vec<usize> = inst
            .tokens
            .iter()
            .map(|t| vocab.id(t).ok_or_else(|| ForgeError::validation(format!("token {t:?} not in vocabulary"))))
            .collect::<Result<_>>()?;
        let verbalizer_ids = vocab.verbalizer_ids(&inst.verbalizers)?;
        let mut label_input = ids.clone();
        label_input[inst.label_mask_position] = mask_id;
        let protected: BTreeSet<usize> = inst.skeleton_positions().into_iter().collect();
        let s = instance_seed(seed, n);
        let mlm = match sample_token_masks(ids.len(), mask_ratio, s, &protected) {
            Ok(plan) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let wrong = *Label::ALL
                    .iter()
                    .filter(|l| **l != inst.gold)
                    .collect::<Vec<_>>()
                    .choose(&mut rng)
                    .expect("two wrong labels");
                let mut correct_input = ids.clone();
                correct_input[inst.label_mask_position] = verbalizer_ids[inst.gold.index()];
                let mut wrong_input = ids.clone();
                wrong_input[inst.label_mask_position] = verbalizer_ids[wrong.index()];
                for p in &plan.masked_positions {
                    correct_input[*p] = mask_id;
                    wrong_input[*p] = mask_id;
                }
                Some(MlmExample {
                    correct_input,
                    wrong_input,
                    originals: plan.masked_positions.iter().map(|p| ids[*p]).collect(),
                })
            }
            Err(ForgeError::Validation(_)) => None,
            Err(e) => return Err(e),
        };
        out.push(TrainingExample { label_input, verbalizer_ids, gold: inst.gold, mlm });
    }
    Ok(out)
}

/// Parameters are one flat vector: embeddings `[V × d]`, projection `[V × d]`, bias `[V]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer {
    pub vocab: Vocab,
    pub dim: usize,
    params: Vec<f64>,
}

impl ToyScorer {
    pub fn new(vocab: Vocab, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(ForgeError::validation("embed_dim must be ≥ 1"));
        }
        let v = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let mut params: Vec<f64> = (0..2 * v * dim).map(|_| normal.sample(&mut rng)).collect();
        params.extend(std::iter::repeat_n(0.0, v));
        Ok(ToyScorer { vocab, dim, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn proj_offset(&self) -> usize {
        self.vocab.len() * self.dim
    }

    fn bias_offset(&self) -> usize {
        2 * self.vocab.len() * self.dim
    }

    fn hidden(&self, input: &[usize]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d];
        for id in input {
            for (k, hk) in h.iter_mut().enumerate() {
                *hk += self.params[id * d + k];
            }
        }
        let scale = 1.0 / input.len().max(1) as f64;
        h.iter_mut().for_each(|x| *x *= scale);
        h
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        let (d, w, b) = (self.dim, self.proj_offset(), self.bias_offset());
        (0..self.vocab.len())
            .map(|v| {
                let row = &self.params[w + v * d..w + (v + 1) * d];
                self.params[b + v] + row.iter().zip(h).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect()
    }

    /// Vocabulary logits for a bag of input ids.
    pub fn logits(&self, input: &[usize]) -> Vec<f64> {
        self.project(&self.hidden(input))
    }

    fn backward(&self, input: &[usize], h: &[f64], dz: &[f64], grad: &mut [f64]) {
        let (d, w, b) = (self.dim, self.proj_offset(), self.bias_offset());
        let mut dh = vec![0.0; d];
        for (v, g) in dz.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            grad[b + v] += g;
            for k in 0..d {
                grad[w + v * d + k] += g * h[k];
                dh[k] += g * self.params[w + v * d + k];
            }
        }
        let scale = 1.0 / input.len().max(1) as f64;
        for id in input {
            for k in 0..d {
                grad[id * d + k] += dh[k] * scale;
            }
        }
    }

    fn mlm_term(&self, input: &[usize], originals: &[usize], correct: bool, weight: f64, grad: Option<&mut [f64]>) -> f64 {
        let h = self.hidden(input);
        let z = self.project(&h);
        let scale = weight / originals.len() as f64;
        match grad {
            Some(grad) => {
                let mut dz = vec![0.0; z.len()];
                let loss: f64 = originals
                    .iter()
                    .map(|id| mlm_position_loss(&z, *id, correct, Some((&mut dz, scale))))
                    .sum();
                self.backward(input, &h, &dz, grad);
                loss * scale
            }
            None => originals.iter().map(|id| mlm_position_loss(&z, *id, correct, None)).sum::<f64>() * scale,
        }
    }

    fn objective(&self, batch: &[TrainingExample], mut grad: Option<&mut [f64]>) -> Result<f64> {
        if batch.is_empty() {
            return Err(ForgeError::validation("empty training batch"));
        }
        let weight = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            let h = self.hidden(&ex.label_input);
            let z = self.project(&h);
            match grad.as_deref_mut() {
                Some(g) => {
                    let mut dz = vec![0.0; z.len()];
                    total += weight * decoupled_label_loss_with_grad(&z, ex.verbalizer_ids, ex.gold, Some(&mut dz))?;
                    dz.iter_mut().for_each(|x| *x *= weight);
                    self.backward(&ex.label_input, &h, &dz, g);
                }
                None => total += weight * decoupled_label_loss_with_grad(&z, ex.verbalizer_ids, ex.gold, None)?,
            }
            if let Some(m) = &ex.mlm {
                total += self.mlm_term(&m.correct_input, &m.originals, true, weight, grad.as_deref_mut());
                total += self.mlm_term(&m.wrong_input, &m.originals, false, weight, grad.as_deref_mut());
            }
        }
        if !total.is_finite() {
            return Err(ForgeError::numerical("training loss is not finite"));
        }
        Ok(total)
    }

    /// Mean over examples of label loss + MLM (correct) + MLM (wrong).
    pub fn loss(&self, batch: &[TrainingExample]) -> Result<f64> {
        self.objective(batch, None)
    }

    pub fn loss_and_grad(&self, batch: &[TrainingExample]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.objective(batch, Some(&mut grad))?;
        Ok((loss, grad))
    }

    /// Label for an id sequence whose label slot holds the mask.
    pub fn predict_ids(&self, label_input: &[usize], verbalizer_ids: [usize; 3]) -> Label {
        predict_from_row(&self.logits(label_input), verbalizer_ids)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scorer: ToyScorer,
    /// Loss before each update.
    pub loss_trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

pub fn toy_train(instances: &[ClozeInstance], cfg: &ToyScorerConfig) -> Result<TrainOutcome> {
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(ForgeError::validation("learning_rate must be > 0"));
    }
    let vocab = if cfg.vocab.is_empty() {
        Vocab::from_instances(instances)
    } else {
        Vocab::from_tokens(cfg.vocab.iter().map(String::as_str))
    };
    let batch = prepare_examples(instances, &vocab, cfg.mask_ratio, cfg.seed)?;
    let mut scorer = ToyScorer::new(vocab, cfg.embed_dim, cfg.seed)?;
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (loss, grad) = scorer
            .loss_and_grad(&batch)
            .map_err(|e| match e {
                ForgeError::Numerical { message, .. } => ForgeError::Numerical { message, step: Some(step) },
                other => other,
            })?;
        trace.push(loss);
        for (p, g) in scorer.params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        if scorer.params.iter().any(|p| !p.is_finite()) {
            return Err(ForgeError::Numerical { message: "parameters diverged".into(), step: Some(step) });
        }
    }
    Ok(TrainOutcome { scorer, loss_trace: trace })
}

/// Argmax over verbalizer logits at the label slot; unknown tokens map to `<unk>`.
pub fn predict_label(scorer: &ToyScorer, instance: &ClozeInstance) -> Result<Label> {
    let mut ids: Vec<usize> = instance.tokens.iter().map(|t| scorer.vocab.id_or_unk(t)).collect();
    ids[instance.label_mask_position] = scorer.vocab.id_or_unk(MASK_TOKEN);
    Ok(scorer.predict_ids(&ids, scorer.vocab.verbalizer_ids(&instance.verbalizers)?))
}

pub fn accuracy_on(scorer: &ToyScorer, instances: &[ClozeInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for inst in instances {
        if predict_label(scorer, inst)? == inst.gold {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

const TITLES: [&str; 10] = ["Aurora", "Basilisk", "Cobalt", "Delta", "Ember", "Falcon", "Granite", "Harbor", "Iris", "Juniper"];
const KEYS: [&str; 6] = ["genre", "label", "studio", "producer", "format", "color"];
const VALUES: [&str; 8] = ["jazz", "rock", "Apex", "Nimbus", "vinyl", "tape", "red", "blue"];
const OTHER_KEYS: [&str; 4] = ["capital", "population", "mayor", "river"];
const OTHER_VALUES: [&str; 5] = ["Oslo", "large", "Smith", "Nile", "small"];

/// Balanced synthetic set following a lexical rule: the hypothesis restates
/// the premise value (E), negates it (C), or talks about an unrelated
/// attribute (N). `n` should be a multiple of 3 for exact balance.
pub fn synthetic_rule_dataset(n: usize, seed: u64) -> Vec<ClozeInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 3]).collect();
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, gold)| {
            let title = TITLES[rng.random_range(0..TITLES.len())];
            let key = KEYS[rng.random_range(0..KEYS.len())];
            let value = VALUES[rng.random_range(0..VALUES.len())];
            let premise = format!("The {key} of {title} is {value} .");
            let hypothesis = match gold {
                Label::Entailment => format!("{title} {key} is {value} ."),
                Label::Contradiction => format!("{title} {key} is not {value} ."),
                Label::Neutral => {
                    let k = OTHER_KEYS[rng.random_range(0..OTHER_KEYS.len())];
                    let v = OTHER_VALUES[rng.random_range(0..OTHER_VALUES.len())];
                    format!("{title} {k} is {v} .")
                }
            };
            let mut inst = build_pattern(&premise, &hypothesis, gold).expect("non-empty synthetic texts");
            inst.id = format!("syn-{i}");
            inst
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_layout() {
        let v = Vocab::from_tokens(["a", "Yes", "b"]);
        assert_eq!(v.tokens()[..5], Vocab::SPECIALS.map(String::from));
        assert_eq!(v.id("a"), Some(5));
        assert_eq!(v.len(), 7);
        assert_eq!(v.verbalizer_ids(&Verbalizers::default()).unwrap(), [2, 3, 4]);
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let a = synthetic_rule_dataset(30, 4);
        assert_eq!(a, synthetic_rule_dataset(30, 4));
        for l in Label::ALL {
            assert_eq!(a.iter().filter(|i| i.gold == l).count(), 10);
        }
    }

    #[test]
    fn vocabulary_must_cover_tokens() {
        let data = synthetic_rule_dataset(3, 1);
        let cfg = ToyScorerConfig { vocab: vec!["only".into()], steps: 1, ..Default::default() };
        assert!(matches!(toy_train(&data, &cfg), Err(ForgeError::Validation(_))));
    }

    #[test]
    fn bad_config_rejected() {
        let data = synthetic_rule_dataset(3, 1);
        assert!(toy_train(&data, &ToyScorerConfig { embed_dim: 0, ..Default::default() }).is_err());
        assert!(toy_train(&data, &ToyScorerConfig { learning_rate: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn divergence_reports_step() {
        let data = synthetic_rule_dataset(9, 1);
        let cfg = ToyScorerConfig { learning_rate: 1e300, steps: 5, ..Default::default() };
        match toy_train(&data, &cfg) {
            Err(ForgeError::Numerical { step: Some(_), .. }) => {}
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn training_reduces_loss() {
        let data = synthetic_rule_dataset(30, 2);
        let out = toy_train(&data, &ToyScorerConfig { steps: 50, ..Default::default() }).unwrap();
        assert!(out.loss_trace[49] < out.loss_trace[0]);
    }
}

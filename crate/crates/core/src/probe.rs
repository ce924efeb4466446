//! Knowledge probes: factual (proper noun / number) and relational (main
//! verb) cloze prompts built from hypotheses, and top-k scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::numeral::{alternate_form, is_number_word};
use crate::annotate::pos::MASK_TOKEN;
use crate::annotate::{Annotated, Annotator, Pos};
use crate::corpus::{Pair, PairRef};
use crate::error::{ForgeError, Result};
use crate::label::Label;
use crate::rng::keyed_rng;
use crate::text::split_possessive;

/// Auxiliaries and copulas never used as relational targets.
pub const AUXILIARIES: [&str; 13] = ["is", "was", "are", "were", "be", "been", "being", "has", "have", "had", "do", "does", "did"];

/// Lowercase function words allowed inside a proper-noun run ("Breakfast in America").
const PROPN_CONNECTORS: [&str; 4] = ["of", "in", "the", "and"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeType {
    Factual,
    Relational,
}

impl std::fmt::Display for KnowledgeType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KnowledgeType::Factual => "factual",
            KnowledgeType::Relational => "relational",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text_with_mask: String,
    /// Lowercased.
    pub gold_surfaces: BTreeSet<String>,
    pub knowledge_type: KnowledgeType,
    pub source_label: Label,
    pub with_premise: bool,
    pub pair_ref: PairRef,
}

/// Candidate span over tokens `start..end`, with the surface to mask.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Span {
    start: usize,
    end: usize,
    byte_start: usize,
    byte_end: usize,
    surface: String,
}

fn span_of(a: &Annotated, start: usize, end: usize) -> Span {
    let (byte_start, mut byte_end) = a.byte_range(start, end);
    let last = &a.tokens[end - 1].text;
    let (stem, suffix) = split_possessive(last);
    if !suffix.is_empty() && !stem.is_empty() {
        byte_end -= suffix.len();
    }
    Span { start, end, byte_start, byte_end, surface: a.text[byte_start..byte_end].to_string() }
}

fn factual_spans(a: &Annotated) -> Vec<Span> {
    let pos = |i: usize| a.annotations[i].pos;
    let n = a.tokens.len();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        if pos(i) == Pos::PROPN {
            let mut end = i + 1;
            loop {
                if end < n && pos(end) == Pos::PROPN {
                    end += 1;
                    continue;
                }
                // connector words only count when a proper noun follows them
                let mut j = end;
                while j < n && PROPN_CONNECTORS.contains(&a.tokens[j].text.as_str()) {
                    j += 1;
                }
                if j > end && j < n && pos(j) == Pos::PROPN && split_possessive(&a.tokens[end - 1].text).1.is_empty() {
                    end = j + 1;
                } else {
                    break;
                }
            }
            spans.push(span_of(a, i, end));
            i = end;
        } else if pos(i) == Pos::NUM {
            let word = |k: usize| is_number_word(&a.tokens[k].text.to_lowercase());
            let mut end = i + 1;
            if word(i) {
                while end < n && pos(end) == Pos::NUM && word(end) {
                    end += 1;
                }
            }
            spans.push(span_of(a, i, end));
            i = end;
        } else {
            i += 1;
        }
    }
    spans
}

fn relational_spans(a: &Annotated) -> Vec<Span> {
    (0..a.tokens.len())
        .filter(|i| a.annotations[*i].pos == Pos::VERB && !AUXILIARIES.contains(&a.tokens[*i].text.to_lowercase().as_str()))
        .map(|i| span_of(a, i, i + 1))
        .collect()
}

fn check_label(pair: &Pair) -> Result<Label> {
    match pair.hypothesis.label {
        Label::Neutral => Err(ForgeError::validation(format!("{}: neutral hypotheses are not probed", pair.pair_ref()))),
        l => Ok(l),
    }
}

/// How many spans to turn into prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSelection {
    /// One span drawn uniformly with the seeded generator.
    #[default]
    Sampled,
    /// Every candidate span.
    All,
}

fn emit(
    pair: &Pair,
    a: &Annotated,
    spans: Vec<Span>,
    kind: KnowledgeType,
    seed: u64,
    selection: SpanSelection,
    gold: impl Fn(&Span) -> Result<BTreeSet<String>>,
) -> Result<Vec<Prompt>> {
    let label = check_label(pair)?;
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    let pr = pair.pair_ref();
    let chosen: Vec<usize> = match selection {
        SpanSelection::All => (0..spans.len()).collect(),
        SpanSelection::Sampled => {
            let mut rng = keyed_rng(seed, &format!("{pr}/{kind}"));
            vec![rng.random_range(0..spans.len())]
        }
    };
    chosen
        .into_iter()
        .map(|idx| {
            let s = &spans[idx];
            let text = format!("{}{MASK_TOKEN}{}", &a.text[..s.byte_start], &a.text[s.byte_end..]);
            Ok(Prompt {
                id: format!("{pr}/{kind}/{idx}"),
                text_with_mask: text,
                gold_surfaces: gold(s)?,
                knowledge_type: kind,
                source_label: label,
                with_premise: false,
                pair_ref: pr.clone(),
            })
        })
        .collect()
}

/// Mask a proper-noun run or a number. Numbers also accept their alternate
/// (digits ↔ words) form.
pub fn gen_factual_prompts(pair: &Pair, annotated: &Annotated, seed: u64, selection: SpanSelection) -> Result<Vec<Prompt>> {
    let spans = factual_spans(annotated);
    emit(pair, annotated, spans, KnowledgeType::Factual, seed, selection, |s| {
        let surface = s.surface.to_lowercase();
        let mut gold = BTreeSet::new();
        if annotated.annotations[s.start].pos == Pos::NUM {
            if let Some(alt) = alternate_form(&surface) {
                gold.insert(alt.to_lowercase());
            }
        }
        gold.insert(surface);
        let _ = s.end;
        Ok(gold)
    })
}

/// Mask a main verb; gold is its synonym set (surface and lemma).
pub fn gen_relational_prompts(
    pair: &Pair,
    annotated: &Annotated,
    annotator: &Annotator,
    seed: u64,
    selection: SpanSelection,
) -> Result<Vec<Prompt>> {
    let spans = relational_spans(annotated);
    emit(pair, annotated, spans, KnowledgeType::Relational, seed, selection, |s| {
        let (lemma, _) = annotator.lexicon.analyze_verb(&s.surface);
        let mut gold = annotator.synonyms.synonyms(&s.surface)?;
        gold.extend(annotator.synonyms.synonyms(&lemma)?);
        Ok(gold)
    })
}

/// Prefix the premise. Composing twice or with an empty premise is rejected.
pub fn compose_with_premise(prompt: &Prompt, premise_text: &str) -> Result<Prompt> {
    if prompt.with_premise {
        return Err(ForgeError::validation(format!("{}: prompt already has a premise", prompt.id)));
    }
    if premise_text.trim().is_empty() {
        return Err(ForgeError::validation(format!("{}: empty premise", prompt.id)));
    }
    Ok(Prompt {
        text_with_mask: format!("{premise_text} {}", prompt.text_with_mask),
        with_premise: true,
        ..prompt.clone()
    })
}

fn candidate_forms(candidate: &str) -> Vec<String> {
    let c = candidate.trim().to_lowercase();
    let mut forms = vec![c.clone()];
    if let Some(alt) = alternate_form(&c) {
        forms.push(alt.to_lowercase());
    }
    forms
}

/// True when one of the first `k` candidates matches a gold surface after
/// case folding and numeral normalization.
pub fn score_predictions(prompt: &Prompt, ranked: &[String], k: usize) -> bool {
    ranked
        .iter()
        .take(k)
        .any(|c| candidate_forms(c).iter().any(|f| prompt.gold_surfaces.contains(f)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub ranked: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub knowledge_type: KnowledgeType,
    pub source_label: Label,
    pub with_premise: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Hits at each configured k, in the order of [`ProbeScore::ks`].
    pub hits: Vec<u64>,
    pub total: u64,
}

/// Hit counters per (knowledge type, source label, with premise) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeScore {
    pub ks: Vec<usize>,
    pub cells: BTreeMap<CellKey, CellCounts>,
}

impl ProbeScore {
    pub fn new(mut ks: Vec<usize>) -> Result<Self> {
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() || ks[0] == 0 {
            return Err(ForgeError::validation("k values must be ≥ 1"));
        }
        Ok(ProbeScore { ks, cells: BTreeMap::new() })
    }

    pub fn record(&mut self, prompt: &Prompt, ranked: &[String]) {
        let key = CellKey {
            knowledge_type: prompt.knowledge_type,
            source_label: prompt.source_label,
            with_premise: prompt.with_premise,
        };
        let n = self.ks.len();
        let cell = self.cells.entry(key).or_insert_with(|| CellCounts { hits: vec![0; n], total: 0 });
        cell.total += 1;
        for (slot, k) in cell.hits.iter_mut().zip(&self.ks) {
            if score_predictions(prompt, ranked, *k) {
                *slot += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &ProbeScore) -> Result<()> {
        if self.ks != other.ks {
            return Err(ForgeError::validation("cannot merge probe scores with different k"));
        }
        for (key, c) in &other.cells {
            let cell = self.cells.entry(*key).or_insert_with(|| CellCounts { hits: vec![0; c.hits.len()], total: 0 });
            cell.total += c.total;
            for (a, b) in cell.hits.iter_mut().zip(&c.hits) {
                *a += b;
            }
        }
        Ok(())
    }

    /// TSV table. Factual cells from contradictions are marked lower-is-better.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("knowledge_type\tsource_label\twith_premise\ttotal");
        for k in &self.ks {
            let _ = write!(out, "\ttop{k}_hits\ttop{k}_acc");
        }
        out.push_str("\tdirection\n");
        for (key, c) in &self.cells {
            let _ = write!(out, "{}\t{}\t{}\t{}", key.knowledge_type, key.source_label, key.with_premise, c.total);
            for h in &c.hits {
                let acc = if c.total == 0 { 0.0 } else { 100.0 * *h as f64 / c.total as f64 };
                let _ = write!(out, "\t{h}\t{acc:.2}");
            }
            let lower = key.knowledge_type == KnowledgeType::Factual && key.source_label == Label::Contradiction;
            out.push_str(if lower { "\tlower-is-better\n" } else { "\thigher-is-better\n" });
        }
        out
    }
}

/// Score every prompt that has a prediction; returns the counters and the
/// ids of prompts without one.
pub fn score_all(prompts: &[Prompt], predictions: &[Prediction], ks: Vec<usize>) -> Result<(ProbeScore, Vec<String>)> {
    let by_id: BTreeMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut score = ProbeScore::new(ks)?;
    let mut missing = Vec::new();
    for p in prompts {
        match by_id.get(p.id.as_str()) {
            Some(pred) => score.record(p, &pred.ranked),
            None => missing.push(p.id.clone()),
        }
    }
    Ok((score, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Hypothesis, Split, Table};

    fn pair(text: &str, label: Label) -> Pair {
        Pair {
            table: Table { table_id: "T1".into(), title: "Breakfast in America".into(), category: "Album".into(), rows: vec![] },
            hypothesis: Hypothesis { hyp_id: "h1".into(), table_id: "T1".into(), text: text.into(), label },
            split: Split::Dev,
        }
    }

    fn all_factual(text: &str) -> Vec<Prompt> {
        let ann = Annotator::builtin();
        gen_factual_prompts(&pair(text, Label::Entailment), &ann.annotate(text), 0, SpanSelection::All).unwrap()
    }

    #[test]
    fn duration_number_prompt() {
        let ps = all_factual("Duration of Breakfast in America is 46 minutes");
        let num = ps.iter().find(|p| p.gold_surfaces.contains("46")).unwrap();
        assert_eq!(num.text_with_mask, "Duration of Breakfast in America is <mask> minutes");
        assert_eq!(num.gold_surfaces, ["46", "forty-six"].map(String::from).into());
        let title = ps.iter().find(|p| p.gold_surfaces.contains("breakfast in america")).unwrap();
        assert_eq!(title.text_with_mask, "Duration of <mask> is 46 minutes");
    }

    #[test]
    fn number_word_prompt() {
        let ps = all_factual("Breakfast in America is produced by two producers");
        assert!(ps.iter().any(|p| p.gold_surfaces == ["2", "two"].map(String::from).into()));
    }

    #[test]
    fn no_candidates_no_prompts() {
        assert!(all_factual("it is a good album").is_empty());
    }

    #[test]
    fn possessive_stays_outside_mask() {
        let ps = all_factual("Peter Henderson's album was recorded in 1979.");
        assert!(ps.iter().any(|p| p.text_with_mask == "<mask>'s album was recorded in 1979." && p.gold_surfaces.contains("peter henderson")));
    }

    #[test]
    fn relational_released() {
        let ann = Annotator::builtin();
        let text = "Breakfast in America was released towards the end of 1979.";
        let ps = gen_relational_prompts(&pair(text, Label::Entailment), &ann.annotate(text), &ann, 3, SpanSelection::Sampled).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].text_with_mask, "Breakfast in America was <mask> towards the end of 1979.");
        assert!(ps[0].gold_surfaces.contains("released"));
        assert!(ps[0].gold_surfaces.len() > 1);
    }

    #[test]
    fn auxiliaries_only_skip() {
        let ann = Annotator::builtin();
        let text = "It is.";
        let ps = gen_relational_prompts(&pair(text, Label::Contradiction), &ann.annotate(text), &ann, 3, SpanSelection::All).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn neutral_rejected() {
        let ann = Annotator::builtin();
        let text = "Peter went home.";
        assert!(gen_factual_prompts(&pair(text, Label::Neutral), &ann.annotate(text), 0, SpanSelection::All).is_err());
    }

    #[test]
    fn compose_rules() {
        let p = &all_factual("Duration of Breakfast in America is 46 minutes")[0];
        let c = compose_with_premise(p, "Some premise.").unwrap();
        assert!(c.with_premise && c.text_with_mask.starts_with("Some premise. Duration"));
        assert!(compose_with_premise(&c, "x").is_err());
        assert!(compose_with_premise(p, "").is_err());
    }

    #[test]
    fn scoring_normalizes() {
        let mut p = all_factual("Duration of Breakfast in America is 46 minutes")
            .into_iter()
            .find(|p| p.gold_surfaces.contains("46"))
            .unwrap();
        let r = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(score_predictions(&p, &r(&["forty-six", "x"]), 1));
        p.gold_surfaces = ["2", "two"].map(String::from).into();
        assert!(score_predictions(&p, &r(&["Two"]), 1));
        p.gold_surfaces = ["released", "issued"].map(String::from).into();
        let ranked = r(&["made", "sold", "released"]);
        assert!(!score_predictions(&p, &ranked, 1));
        assert!(score_predictions(&p, &ranked, 5));
    }

    #[test]
    fn counters_and_report() {
        let ps = all_factual("Duration of Breakfast in America is 46 minutes");
        let preds: Vec<Prediction> = ps.iter().map(|p| Prediction { id: p.id.clone(), ranked: vec!["46".into()] }).collect();
        let (s, missing) = score_all(&ps, &preds[..1], vec![5, 1]).unwrap();
        assert_eq!(s.ks, vec![1, 5]);
        assert_eq!(missing.len(), ps.len() - 1);
        let tsv = s.render_tsv();
        assert!(tsv.starts_with("knowledge_type\tsource_label\twith_premise\ttotal\ttop1_hits"));
        assert!(tsv.contains("factual\tE\tfalse\t1\t"));
    }
}

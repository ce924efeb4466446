use std::collections::BTreeSet;

use proptest::prelude::*;

use tabforge::annotate::{Annotator, PosLexicon, SynonymLexicon};
use tabforge::corpus::{join_pairs, parse_table, Hypothesis, Pair, PairRef, Row, Split, Table, TableFormat};
use tabforge::metrics::{accuracy, confusion, consistency_graph, render_report, GoldMap, PredictionSet, Report, ReportFormat};
use tabforge::perturb::{perturb_character, PerturbKind, Perturber};
use tabforge::pet::loss::{decoupled_label_loss, label_conditioned_mlm_loss, predict_from_row, LogitView};
use tabforge::pet::masking::sample_cwwm_masks;
use tabforge::premise_repr::{drr, linearize, parse_linearized, render_bpr, render_universal, TemplateDb};
use tabforge::probe::{gen_factual_prompts, score_predictions, SpanSelection};
use tabforge::Label;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{3,8}"
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

fn table() -> impl Strategy<Value = Table> {
    (phrase(), prop::collection::vec((phrase(), prop::collection::vec(phrase(), 1..4)), 1..9)).prop_map(|(title, rows)| Table {
        table_id: "P".into(),
        title,
        category: String::new(),
        rows: rows.into_iter().map(|(k, v)| Row::new(k, v)).collect(),
    })
}

fn label() -> impl Strategy<Value = Label> {
    prop::sample::select(Label::ALL.to_vec())
}

fn row_of_logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, 4..12)
}

proptest! {
    #[test]
    fn table_json_round_trip(t in table()) {
        let back = parse_table(t.to_json().as_bytes(), TableFormat::CanonicalJson).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn join_accounts_for_every_hypothesis(ids in prop::collection::vec(0u8..4, 0..20)) {
        let tables: Vec<Table> = ["T0", "T1"].iter().map(|id| Table {
            table_id: id.to_string(),
            title: "x".into(),
            category: String::new(),
            rows: vec![Row::new("k", ["v"])],
        }).collect();
        let hyps: Vec<Hypothesis> = ids.iter().enumerate().map(|(i, t)| Hypothesis {
            hyp_id: format!("h{i}"),
            table_id: format!("T{t}"),
            text: "text".into(),
            label: Label::Neutral,
        }).collect();
        let joined = join_pairs(&tables, &hyps, Split::Dev);
        prop_assert_eq!(joined.pairs.len() + joined.rejects.len(), hyps.len());
    }

    #[test]
    fn linearize_round_trip(t in table()) {
        let back = parse_linearized(&linearize(&t).unwrap()).unwrap();
        prop_assert_eq!(back.title, t.title);
        prop_assert_eq!(back.rows, t.rows);
    }

    #[test]
    fn bpr_without_templates_is_universal(t in table()) {
        prop_assert_eq!(render_bpr(&t, &TemplateDb::default()), render_universal(&t));
        prop_assert_eq!(render_universal(&t), render_universal(&t.clone()));
    }

    #[test]
    fn drr_is_nested(t in table(), h in phrase()) {
        let idf = Default::default();
        for k in 1..8 {
            let small = drr(&t, &h, k, &idf).unwrap();
            let big = drr(&t, &h, k + 1, &idf).unwrap();
            let mut it = big.rows.iter();
            for r in &small.rows {
                prop_assert!(it.any(|b| b == r), "k={} row {:?} missing at k+1", k, r.key);
            }
        }
    }

    #[test]
    fn losses_are_non_negative_and_shift_invariant(row in row_of_logits(), gold in label(), c in -50.0f64..50.0, correct: bool) {
        let ids = [1, 2, 3];
        let shifted: Vec<f64> = row.iter().map(|x| x + c).collect();
        let a = decoupled_label_loss(&row, ids, gold).unwrap();
        let b = decoupled_label_loss(&shifted, ids, gold).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        let va = LogitView::new(vec![row.clone()]).unwrap();
        let vb = LogitView::new(vec![shifted.clone()]).unwrap();
        let ma = label_conditioned_mlm_loss(&va, &[0], correct).unwrap();
        let mb = label_conditioned_mlm_loss(&vb, &[0], correct).unwrap();
        prop_assert!(ma >= 0.0);
        prop_assert!((ma - mb).abs() < 1e-9 * ma.max(1.0));
        prop_assert_eq!(predict_from_row(&row, ids), predict_from_row(&shifted, ids));
    }

    #[test]
    fn cwwm_groups_are_atomic(words in prop::collection::vec(prop::sample::select(vec![
        "album", "released", "March", "rock", "pop", "the", "was", "in", "Peter", "recorded", "1979", "quickly",
    ]), 4..30), seed: u64, r in 0.05f64..0.5) {
        let a = Annotator::builtin().annotate(&words.join(" "));
        let tokens = a.token_strings();
        if let Ok(plan) = sample_cwwm_masks(&tokens, &a.annotations, r, seed) {
            let masked: BTreeSet<usize> = plan.masked_positions.iter().copied().collect();
            for (i, t) in tokens.iter().enumerate() {
                let lower = t.to_lowercase();
                let same: Vec<usize> = (0..tokens.len()).filter(|&j| tokens[j].to_lowercase() == lower).collect();
                let hit = same.iter().filter(|j| masked.contains(j)).count();
                prop_assert!(hit == 0 || hit == same.len(), "word {} at {} partially masked", t, i);
            }
            prop_assert!(plan.achieved_ratio() >= r - 1e-9);
        }
    }

    #[test]
    fn top_k_is_monotone(ranked in prop::collection::vec("[a-c]{1,2}", 0..8), k in 1usize..6) {
        let prompts = gen_factual_prompts(&breakfast_pair(), &Annotator::builtin().annotate(BREAKFAST_HYP), 0, SpanSelection::All).unwrap();
        for p in &prompts {
            let mut with_gold = ranked.clone();
            with_gold.push(p.gold_surfaces.iter().next().unwrap().clone());
            for kk in k..k + 3 {
                if score_predictions(p, &with_gold, kk) {
                    prop_assert!(score_predictions(p, &with_gold, kk + 1));
                }
            }
        }
    }

    #[test]
    fn character_noise_keeps_numbers_and_token_count(seed: u64, n_ops in 1usize..6) {
        let text = "Peter Henderson produced 12 rock albums in 1979";
        let out = perturb_character(text, seed, n_ops, &[]).unwrap();
        let before: Vec<&str> = text.split(' ').collect();
        let after: Vec<&str> = out.text.split(' ').collect();
        prop_assert_eq!(before.len(), after.len());
        prop_assert_eq!(after[3], "12");
        prop_assert_eq!(after[7], "1979");
        let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
        prop_assert!(changed <= n_ops);
        prop_assert_ne!(out.text, text);
    }

    #[test]
    fn perturbation_is_deterministic(seed: u64, kinds in prop::sample::subsequence(PerturbKind::ALL.to_vec(), 1..3), gold in label()) {
        let p = Perturber::builtin();
        let pr = PairRef { table_id: "T7".into(), hyp_id: "H".into() };
        let text = "Peter Henderson's album was recorded in California in 1979.";
        let a = p.compose(&pr, text, gold, &kinds, seed).unwrap();
        let b = p.compose(&pr, text, gold, &kinds, seed).unwrap();
        prop_assert_eq!(&a, &b);
        if a.drop_reason.is_none() || a.details.len() == kinds.len() {
            prop_assert_ne!(a.perturbed_text, text);
        }
    }

    #[test]
    fn metric_identities(labels in prop::collection::vec((label(), label()), 0..60)) {
        let mut preds = PredictionSet::new("m", "s");
        let mut gold = GoldMap::new();
        for (i, (p, g)) in labels.iter().enumerate() {
            let k = PairRef { table_id: "T".into(), hyp_id: format!("h{i}") };
            preds.entries.insert(k.clone(), *p);
            gold.insert(k, *g);
        }
        let m = confusion(&preds, &gold).unwrap();
        let acc = accuracy(&preds, &gold).unwrap();
        if !labels.is_empty() {
            prop_assert!((acc - m.trace() as f64 / labels.len() as f64).abs() < 1e-12);
        }
        let same = consistency_graph(&preds, &preds).unwrap();
        prop_assert!(same.is_diagonal());
        prop_assert_eq!(same.trace(), labels.len() as u64);

        let mut report = Report { models: vec!["m".into()], rows: Vec::new() };
        report.push("original", vec![acc]).unwrap();
        prop_assert_eq!(render_report(&report, ReportFormat::Csv), render_report(&report.clone(), ReportFormat::Csv));
    }
}

const BREAKFAST_HYP: &str = "Breakfast in America was released on 29 March 1979 by Supertramp.";

fn breakfast_pair() -> Pair {
    Pair {
        table: Table {
            table_id: "T7".into(),
            title: "Breakfast in America".into(),
            category: "Album".into(),
            rows: vec![Row::new("Released", ["29 March 1979"])],
        },
        hypothesis: Hypothesis { hyp_id: "H".into(), table_id: "T7".into(), text: BREAKFAST_HYP.into(), label: Label::Entailment },
        split: Split::Dev,
    }
}

#[test]
fn prompt_gold_reappears_in_hypothesis() {
    let a = Annotator::builtin().annotate(BREAKFAST_HYP);
    let prompts = gen_factual_prompts(&breakfast_pair(), &a, 4, SpanSelection::All).unwrap();
    assert!(!prompts.is_empty());
    let lower = BREAKFAST_HYP.to_lowercase();
    for p in &prompts {
        assert!(p.gold_surfaces.iter().any(|g| lower.contains(g.as_str())), "{:?}", p.gold_surfaces);
    }
    assert_eq!(prompts, gen_factual_prompts(&breakfast_pair(), &a, 4, SpanSelection::All).unwrap());
}

#[test]
fn synonyms_are_reflexive_and_symmetric() {
    let lex = SynonymLexicon::builtin();
    assert!(!lex.is_empty());
    for (word, _) in lex.iter() {
        let syns = lex.synonyms(word).unwrap();
        assert!(syns.contains(word), "{word} lacks itself");
        for s in &syns {
            assert!(lex.synonyms(s).unwrap().contains(word), "{s} -> {word} missing");
        }
    }
}

#[test]
fn tagger_is_deterministic() {
    let lex = PosLexicon::builtin();
    let tokens: Vec<String> = "The album was recorded in the last half of 1979 .".split(' ').map(String::from).collect();
    assert_eq!(lex.tag(&tokens), lex.tag(&tokens.clone()));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_forge");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn forge(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run forge")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "forge failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn data_args() -> Vec<String> {
    vec![
        "--tables".into(),
        fixture("breakfast.json").display().to_string(),
        "--hypotheses".into(),
        fixture("hypotheses.tsv").display().to_string(),
    ]
}

fn with_data<'a>(head: &[&'a str], data: &'a [String], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(data.iter().map(String::as_str)).chain(tail.iter().copied()).collect()
}

#[test]
fn represent_bpr_with_row_removal() {
    let data = data_args();
    let out = forge(&with_data(&["represent"], &data, &["--mode", "bpr", "--drr", "4", "--hyp-id", "H1"]));
    assert_eq!(
        stdout(&out),
        "Breakfast in America was released on 29 March 1979. Breakfast in America was recorded in May–December 1978. \
         Breakfast in America was recorded at The Village Recorder in LA. The genre of Breakfast in America is Pop, art rock, soft rock.\n"
    );
}

#[test]
fn represent_tables_only() {
    let table = fixture("breakfast.json");
    let out = forge(&["represent", "--tables", table.to_str().unwrap(), "--mode", "linearize"]);
    let text = stdout(&out);
    assert!(text.starts_with("title : Breakfast in America ; Released : 29 March 1979"));
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = forge(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(forge(&["--help"]).status.code(), Some(0));
}

#[test]
fn ingest_reports_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let hyps = dir.path().join("h.tsv");
    std::fs::write(&hyps, "hyp_id\ttable_id\ttext\tlabel\nA\tT7\tSupertramp is a band.\tE\nB\tT9\tMissing table.\tN\n").unwrap();
    let rejects = dir.path().join("rejects.jsonl");
    let table = fixture("breakfast.json");
    let out = forge(&[
        "ingest",
        "--tables",
        table.to_str().unwrap(),
        "--hypotheses",
        hyps.to_str().unwrap(),
        "--rejects",
        rejects.to_str().unwrap(),
    ]);
    let pairs = jsonl(&stdout(&out));
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0]["hypothesis"]["hyp_id"], "A");
    let rej = jsonl(&std::fs::read_to_string(rejects).unwrap());
    assert_eq!(rej.len(), 1);
    assert_eq!(rej[0]["hyp_id"], "B");
}

#[test]
fn perturb_is_deterministic() {
    let data = data_args();
    let args = with_data(&["perturb"], &data, &["--kinds", "name", "--seed", "5"]);
    let a = stdout(&forge(&args));
    let b = stdout(&forge(&args));
    assert_eq!(a, b);
    let recs = jsonl(&a);
    assert!(!recs.is_empty());
    for r in &recs {
        assert_eq!(r["new_label"], "N");
        assert_eq!(r["seed"], 5);
    }
}

#[test]
fn perturb_file_paraphrase_and_dropped() {
    let data = data_args();
    let dir = tempfile::tempdir().unwrap();
    let names = dir.path().join("names.txt");
    std::fs::write(&names, "John Doe\n").unwrap();
    let dropped = dir.path().join("dropped.jsonl");
    let out_path = dir.path().join("kept.jsonl");
    let map = fixture("paraphrases.tsv");
    let out = forge(&with_data(
        &["--out", out_path.to_str().unwrap(), "perturb"],
        &data,
        &[
            "--kinds",
            "paraphrase,name",
            "--paraphrase-map",
            map.to_str().unwrap(),
            "--names",
            names.to_str().unwrap(),
            "--dropped",
            dropped.to_str().unwrap(),
        ],
    ));
    assert!(stdout(&out).is_empty());
    let kept = jsonl(&std::fs::read_to_string(out_path).unwrap());
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0]["perturbed_text"], "Only rock albums are produced by John Doe.");
    let dropped = jsonl(&std::fs::read_to_string(dropped).unwrap());
    assert_eq!(dropped.len(), 5);
    assert!(dropped.iter().all(|r| r["new_label"] == "dropped"));
}

#[test]
fn json_errors_and_exit_codes() {
    let out = forge(&["--json-errors", "represent", "--tables", "/nonexistent/table.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"title\": \"x\", \"rows\": [").unwrap();
    let out = forge(&["--json-errors", "represent", "--tables", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert_eq!(err["error"]["exit_code"], 2);
    assert!(err["error"]["offset"].is_u64());

    let out = forge(&["--json-errors", "train-toy", "--synthetic", "30", "--learning-rate", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = forge(&["--json-errors", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn numerical_failure_exits_three() {
    let out = forge(&["train-toy", "--synthetic", "30", "--learning-rate", "1e300", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("breakfast.json"), dir.path().join("t.json")).unwrap();
    std::fs::copy(fixture("hypotheses.tsv"), dir.path().join("h.tsv")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\nmode = \"bpr\"\ndrr = 1\n[paths]\ntables = \"t.json\"\nhypotheses = \"h.tsv\"\n").unwrap();
    let out = forge(&["--config", cfg.to_str().unwrap(), "represent", "--hyp-id", "H6"]);
    assert_eq!(stdout(&out), "Breakfast in America was released on 29 March 1979.\n");
    // Flags win over the file.
    let out = forge(&["--config", cfg.to_str().unwrap(), "represent", "--hyp-id", "H6", "--mode", "universal"]);
    assert_eq!(stdout(&out), "The released of Breakfast in America is 29 March 1979.\n");
}

#[test]
fn mask_text_and_instances() {
    let out = forge(&["mask", "--text", "The album was recorded in the last half of 1979.", "--strategy", "cwwm", "--ratio", "0.2"]);
    let rec = &jsonl(&stdout(&out))[0];
    assert_eq!(rec["plan"]["strategy"], "cwwm");
    assert!(!rec["plan"]["masked_positions"].as_array().unwrap().is_empty());

    let data = data_args();
    let a = stdout(&forge(&with_data(&["mask"], &data, &["--seed", "3"])));
    assert_eq!(a, stdout(&forge(&with_data(&["mask"], &data, &["--seed", "3"]))));
    assert_eq!(jsonl(&a).len(), 6);
}

#[test]
fn export_then_score_round_trip() {
    let data = data_args();
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.txt");
    let batches = dir.path().join("batches.jsonl");
    let out = forge(&with_data(
        &["--out", batches.to_str().unwrap(), "export-batches"],
        &data,
        &["--mode", "bpr", "--vocab-out", vocab.to_str().unwrap()],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let vocab_len = std::fs::read_to_string(&vocab).unwrap().lines().count();
    let records = jsonl(&std::fs::read_to_string(&batches).unwrap());
    assert_eq!(records.len(), 6);

    // Uniform logits everywhere: every instance predicts E on the tie.
    let mut logits = String::new();
    for r in &records {
        let mut positions = vec![r["label_mask_position"].as_u64().unwrap()];
        positions.extend(r["context_mask_positions"].as_array().unwrap().iter().map(|p| p.as_u64().unwrap()));
        let rows = vec![vec![0.0; vocab_len]; positions.len()];
        logits.push_str(&serde_json::json!({"id": r["id"], "positions": positions, "logits": rows}).to_string());
        logits.push('\n');
    }
    let logits_path = dir.path().join("logits.jsonl");
    std::fs::write(&logits_path, logits).unwrap();
    let preds = dir.path().join("preds.tsv");
    let out = forge(&[
        "score",
        "--batches",
        batches.to_str().unwrap(),
        "--logits",
        logits_path.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--predictions-out",
        preds.to_str().unwrap(),
    ]);
    let scores = jsonl(&stdout(&out));
    assert_eq!(scores.len(), 6);
    let v = vocab_len as f64;
    let want = v.ln() + 2.0 * (v / (v - 1.0)).ln();
    for s in &scores {
        assert_eq!(s["predicted"], "E");
        assert!((s["label_loss"].as_f64().unwrap() - want).abs() < 1e-9);
    }
    let tsv = std::fs::read_to_string(preds).unwrap();
    assert!(tsv.starts_with("pair_ref\tlabel\n"));
    assert_eq!(tsv.lines().count(), 7);
}

#[test]
fn probe_generation_and_scoring() {
    let data = data_args();
    let out = forge(&with_data(&["probe-gen"], &data, &["--all-spans", "--types", "factual"]));
    let prompts = jsonl(&stdout(&out));
    assert!(!prompts.is_empty());
    assert!(prompts.iter().all(|p| p["knowledge_type"] == "factual" && p["source_label"] != "N"));
    assert_eq!(prompts.len(), 9);
    assert!(prompts.iter().all(|p| p["text_with_mask"].as_str().unwrap().matches("<mask>").count() == 1));

    let dir = tempfile::tempdir().unwrap();
    let prompts_path = dir.path().join("prompts.jsonl");
    std::fs::write(&prompts_path, stdout(&out)).unwrap();
    let mut preds = String::new();
    for p in &prompts {
        let gold = p["gold_surfaces"][0].as_str().unwrap();
        preds.push_str(&serde_json::json!({"id": p["id"], "ranked": ["zzz", gold]}).to_string());
        preds.push('\n');
    }
    let preds_path = dir.path().join("preds.jsonl");
    std::fs::write(&preds_path, preds).unwrap();
    let out = forge(&["probe-score", "--prompts", prompts_path.to_str().unwrap(), "--predictions", preds_path.to_str().unwrap(), "--k", "1,2"]);
    assert_eq!(
        stdout(&out),
        "knowledge_type\tsource_label\twith_premise\ttotal\ttop1_hits\ttop1_acc\ttop2_hits\ttop2_acc\tdirection\n\
         factual\tE\tfalse\t4\t0\t0.00\t4\t100.00\thigher-is-better\n\
         factual\tC\tfalse\t5\t0\t0.00\t5\t100.00\tlower-is-better\n"
    );
}

#[test]
fn train_toy_summary() {
    let out = forge(&["train-toy", "--synthetic", "60", "--steps", "20", "--seed", "1"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["instances"], 60);
    assert_eq!(v["loss_trace"].as_array().unwrap().len(), 20);
    assert!(v["final_loss"].as_f64().unwrap() < v["initial_loss"].as_f64().unwrap());
}

#[test]
fn report_over_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("hypotheses.tsv"), dir.path().join("gold.tsv")).unwrap();
    std::fs::write(dir.path().join("a.tsv"), "pair_ref\tlabel\nT7/H1\tE\nT7/H2\tN\nT7/H3\tC\nT7/H4\tE\nT7/H5\tE\nT7/H6\tE\n").unwrap();
    std::fs::write(dir.path().join("b.tsv"), "pair_ref\tlabel\nT7/H1\tE\nT7/H2\tN\nT7/H3\tC\nT7/H4\tE\nT7/H5\tN\nT7/H6\tC\n").unwrap();
    std::fs::write(dir.path().join("m.tsv"), "set\tmodel\tgold\tpredictions\noriginal\tcls\tgold.tsv\ta.tsv\noriginal\tpet\tgold.tsv\tb.tsv\n").unwrap();
    let manifest = dir.path().join("m.tsv");
    let out = forge(&["report", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(stdout(&out), "perturbation,cls,pet\noriginal,66.67,100.00\nrandom,33.33,33.33\n");
    let out = forge(&["report", "--manifest", manifest.to_str().unwrap(), "--two-label", "--format", "markdown"]);
    let md = stdout(&out);
    assert!(md.contains("| original | 75.00 | 100.00 |"), "{md}");
}

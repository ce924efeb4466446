//! The `forge` command line.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::annotate::{Annotator, Gazetteer, SynonymLexicon};
use crate::config::RunConfig;
use crate::corpus::{join_pairs, parse_hypotheses, parse_table, Hypothesis, Pair, PairRef, Split, Table, TableFormat};
use crate::error::{ForgeError, Result};
use crate::io::{from_jsonl, read_bytes, read_string, to_jsonl, write_atomic};
use crate::label::Label;
use crate::metrics::{accuracy, confusion, parse_predictions, render_report, two_label, GoldMap, PredictionSet, Report, ReportFormat};
use crate::perturb::{parse_kinds, parse_names, ParaphraseMap, ParaphraseProvider, PerturbationRecord, Perturber, Transition, TransitionRule};
use crate::pet::batch::{export_instance, plan_context_mask, score_batches, BatchRecord, LogitRecord};
use crate::pet::masking::{sample_cwwm_masks, sample_token_masks, MaskStrategy, DEFAULT_MASK_RATIO};
use crate::pet::toy::{accuracy_on, predict_label, synthetic_rule_dataset, toy_train, ToyScorerConfig, Vocab};
use crate::pet::{build_pattern, ClozeInstance};
use crate::premise_repr::{drr, render, LexicalScorer, RenderMode, TemplateDb};
use crate::probe::{compose_with_premise, gen_factual_prompts, gen_relational_prompts, score_all, KnowledgeType, Prediction, Prompt, SpanSelection};
use crate::rng::fnv1a;

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Premises, cloze objectives, knowledge probes and perturbation sets for table NLI")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Output file (written atomically). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct DataArgs {
    /// Table file, JSON array of tables, or directory of table files.
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    hypotheses: Option<PathBuf>,
    /// canonical_json or infotabs_json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Debug, Args, Clone, Default)]
struct PremiseArgs {
    /// universal, bpr or linearize.
    #[arg(long)]
    mode: Option<String>,
    /// Keep only the K rows most relevant to the hypothesis.
    #[arg(long)]
    drr: Option<usize>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    idf: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
struct MaskArgs {
    /// token or cwwm.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
struct ResourceArgs {
    /// Directory with gazetteer term lists and location_map.tsv.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Synonym lexicon TSV.
    #[arg(long)]
    synonyms: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse tables and hypotheses and emit joined pairs as JSONL.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Where to write unresolved hypotheses (JSONL).
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Render premises, one line per table or pair.
    Represent {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        premise: PremiseArgs,
        /// Restrict to one hypothesis.
        #[arg(long)]
        hyp_id: Option<String>,
    },
    /// Sample context mask plans.
    Mask {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        premise: PremiseArgs,
        #[command(flatten)]
        mask: MaskArgs,
        /// Mask a single sentence instead of cloze instances.
        #[arg(long)]
        text: Option<String>,
    },
    /// Export masked cloze batches for an external scorer.
    ExportBatches {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        premise: PremiseArgs,
        #[command(flatten)]
        mask: MaskArgs,
        /// Also write the vocabulary (one token per line).
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Generate knowledge probe prompts from E and C hypotheses.
    ProbeGen {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        premise: PremiseArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        /// Also emit each prompt prefixed with its premise.
        #[arg(long)]
        with_premise: bool,
        /// One prompt per candidate span instead of one sampled span.
        #[arg(long)]
        all_spans: bool,
        /// factual, relational or both (comma separated).
        #[arg(long)]
        types: Option<String>,
    },
    /// Score ranked predictions against prompts at top-k.
    ProbeScore {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Comma separated k values.
        #[arg(long)]
        k: Option<String>,
    },
    /// Build a perturbation set.
    Perturb {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        /// Ordered kinds, e.g. number,paraphrase,name.
        #[arg(long)]
        kinds: Option<String>,
        /// rule, file or identity.
        #[arg(long)]
        paraphrase: Option<String>,
        #[arg(long)]
        paraphrase_map: Option<PathBuf>,
        #[arg(long)]
        names: Option<PathBuf>,
        #[arg(long)]
        n_ops: Option<usize>,
        /// Label for negated contradictions: drop, E, N or C.
        #[arg(long)]
        negation_contradiction: Option<String>,
        /// Where to write dropped records (JSONL).
        #[arg(long)]
        dropped: Option<PathBuf>,
    },
    /// Train the toy scorer and report its accuracy.
    TrainToy {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        premise: PremiseArgs,
        /// Train on N synthetic rule instances instead of data files.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        /// Write predictions as a `pair_ref<TAB>label` TSV.
        #[arg(long)]
        predictions_out: Option<PathBuf>,
    },
    /// Compute losses and predictions from imported logits.
    Score {
        #[arg(long)]
        batches: PathBuf,
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        predictions_out: Option<PathBuf>,
    },
    /// Accuracy table over perturbation sets and models.
    Report {
        /// TSV with columns set, model, gold, predictions.
        #[arg(long)]
        manifest: PathBuf,
        /// csv or markdown.
        #[arg(long)]
        format: Option<String>,
        /// Evaluate E vs C only.
        #[arg(long)]
        two_label: bool,
        /// Append confusion matrices.
        #[arg(long)]
        confusion: bool,
    },
}

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_atomic(p, text.as_bytes()),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }

    fn tables_path(&self, d: &DataArgs) -> Option<PathBuf> {
        d.tables.clone().or_else(|| self.cfg.paths.tables.clone())
    }

    fn hypotheses_path(&self, d: &DataArgs) -> Option<PathBuf> {
        d.hypotheses.clone().or_else(|| self.cfg.paths.hypotheses.clone())
    }

    fn load_tables(&self, d: &DataArgs) -> Result<Vec<Table>> {
        let path = self.tables_path(d).ok_or_else(|| ForgeError::validation("--tables is required"))?;
        let format = d.format.clone().or_else(|| self.cfg.table_format.clone()).unwrap_or_else(|| "canonical_json".into());
        load_tables(&path, TableFormat::from_str(&format)?)
    }

    fn load_hypotheses(&self, d: &DataArgs) -> Result<Vec<Hypothesis>> {
        let path = self.hypotheses_path(d).ok_or_else(|| ForgeError::validation("--hypotheses is required"))?;
        parse_hypotheses(&read_bytes(&path)?)
    }

    fn split(&self, d: &DataArgs) -> Result<Split> {
        Split::from_str(d.split.as_deref().or(self.cfg.split.as_deref()).unwrap_or("dev"))
    }

    /// Joined pairs; rejects are reported on stderr.
    fn load_pairs(&self, d: &DataArgs) -> Result<Vec<Pair>> {
        let joined = join_pairs(&self.load_tables(d)?, &self.load_hypotheses(d)?, self.split(d)?);
        for r in &joined.rejects {
            eprintln!("forge: rejected {}/{}: {}", r.table_id, r.hyp_id, r.reason);
        }
        Ok(joined.pairs)
    }

    fn premise(&self, p: &PremiseArgs) -> Result<PremiseBuilder> {
        let mode = RenderMode::from_str(p.mode.as_deref().or(self.cfg.mode.as_deref()).unwrap_or("universal"))?;
        let templates = match p.templates.clone().or_else(|| self.cfg.paths.templates.clone()) {
            Some(path) => TemplateDb::from_tsv(&read_string(&path)?)?,
            None => TemplateDb::builtin(),
        };
        let idf = match p.idf.clone().or_else(|| self.cfg.paths.idf.clone()) {
            Some(path) => LexicalScorer::idf_from_tsv(&read_string(&path)?)?,
            None => HashMap::new(),
        };
        Ok(PremiseBuilder { mode, drr: p.drr.or(self.cfg.drr), templates, idf })
    }

    fn mask(&self, m: &MaskArgs) -> Result<(MaskStrategy, f64)> {
        let strategy = MaskStrategy::from_str(m.strategy.as_deref().or(self.cfg.strategy.as_deref()).unwrap_or("token"))?;
        Ok((strategy, m.ratio.or(self.cfg.ratio).unwrap_or(DEFAULT_MASK_RATIO)))
    }

    fn annotator(&self, r: &ResourceArgs) -> Result<Annotator> {
        let mut a = Annotator::builtin();
        if let Some(dir) = r.gazetteer.clone().or_else(|| self.cfg.paths.gazetteer.clone()) {
            a.gazetteer = Gazetteer::load_dir(&dir)?;
        }
        if let Some(path) = r.synonyms.clone().or_else(|| self.cfg.paths.synonyms.clone()) {
            a.synonyms = SynonymLexicon::from_tsv(&read_string(&path)?)?;
        }
        Ok(a)
    }
}

struct PremiseBuilder {
    mode: RenderMode,
    drr: Option<usize>,
    templates: TemplateDb,
    idf: HashMap<String, f64>,
}

impl PremiseBuilder {
    fn build(&self, table: &Table, hypothesis: Option<&str>) -> Result<String> {
        match (self.drr, hypothesis) {
            (Some(k), Some(h)) => render(&drr(table, h, k, &self.idf)?, self.mode, &self.templates),
            (Some(_), None) => Err(ForgeError::validation("--drr needs hypotheses")),
            (None, _) => render(table, self.mode, &self.templates),
        }
    }
}

/// Tables from a single document, a JSON array of canonical tables, or a
/// directory of `.json` files read in name order.
pub fn load_tables(path: &Path, format: TableFormat) -> Result<Vec<Table>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_tables(&f, format)?);
        }
        return Ok(out);
    }
    let raw = read_bytes(path)?;
    let with_path = |e: ForgeError| match e {
        ForgeError::Parse { message, offset } => ForgeError::Parse { message: format!("{}: {message}", path.display()), offset },
        ForgeError::Validation(m) => ForgeError::Validation(format!("{}: {m}", path.display())),
        other => other,
    };
    if raw.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'[') {
        let docs: Vec<serde_json::Value> = serde_json::from_slice(&raw).map_err(|e| with_path(e.into()))?;
        return docs
            .iter()
            .map(|d| parse_table(d.to_string().as_bytes(), format).map_err(with_path))
            .collect();
    }
    let mut table = parse_table(&raw, format).map_err(with_path)?;
    if table.table_id.is_empty() {
        table.table_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(vec![table])
}

fn instance_seed(seed: u64, id: &str) -> u64 {
    seed ^ fnv1a(id.as_bytes())
}

fn cloze_instances(ctx: &Ctx, data: &DataArgs, premise: &PremiseArgs) -> Result<Vec<ClozeInstance>> {
    let builder = ctx.premise(premise)?;
    ctx.load_pairs(data)?
        .iter()
        .map(|p| {
            let text = builder.build(&p.table, Some(&p.hypothesis.text))?;
            let mut inst = build_pattern(&text, &p.hypothesis.text, p.hypothesis.label)?;
            inst.id = p.pair_ref().to_string();
            Ok(inst)
        })
        .collect()
}

fn cmd_ingest(ctx: &Ctx, data: &DataArgs, rejects: Option<&Path>) -> Result<()> {
    let joined = join_pairs(&ctx.load_tables(data)?, &ctx.load_hypotheses(data)?, ctx.split(data)?);
    eprintln!("forge: {} pairs, {} rejects", joined.pairs.len(), joined.rejects.len());
    if let Some(path) = rejects {
        write_atomic(path, to_jsonl(&joined.rejects)?.as_bytes())?;
    } else {
        for r in &joined.rejects {
            eprintln!("forge: rejected {}/{}: {}", r.table_id, r.hyp_id, r.reason);
        }
    }
    ctx.emit(&to_jsonl(&joined.pairs)?)
}

fn cmd_represent(ctx: &Ctx, data: &DataArgs, premise: &PremiseArgs, hyp_id: Option<&str>) -> Result<()> {
    let builder = ctx.premise(premise)?;
    let mut out = String::new();
    if ctx.hypotheses_path(data).is_none() {
        for t in ctx.load_tables(data)? {
            out.push_str(&builder.build(&t, None)?);
            out.push('\n');
        }
    } else {
        let pairs: Vec<Pair> = ctx
            .load_pairs(data)?
            .into_iter()
            .filter(|p| hyp_id.is_none_or(|h| p.hypothesis.hyp_id == h))
            .collect();
        if pairs.is_empty() {
            return Err(ForgeError::validation("no matching pairs"));
        }
        for p in &pairs {
            out.push_str(&builder.build(&p.table, Some(&p.hypothesis.text))?);
            out.push('\n');
        }
    }
    ctx.emit(&out)
}

fn cmd_mask(ctx: &Ctx, data: &DataArgs, premise: &PremiseArgs, mask: &MaskArgs, text: Option<&str>) -> Result<()> {
    let (strategy, ratio) = ctx.mask(mask)?;
    let lexicon = crate::annotate::PosLexicon::builtin();
    let mut out = Vec::new();
    if let Some(text) = text {
        let a = Annotator::builtin().annotate(text);
        let tokens = a.token_strings();
        let plan = match strategy {
            MaskStrategy::Token => sample_token_masks(tokens.len(), ratio, ctx.seed, &Default::default())?,
            MaskStrategy::Cwwm => sample_cwwm_masks(&tokens, &a.annotations, ratio, ctx.seed)?,
        };
        out.push(json!({"id": "text", "tokens": tokens, "plan": plan}));
    } else {
        for inst in cloze_instances(ctx, data, premise)? {
            let plan = plan_context_mask(&inst, &lexicon, strategy, ratio, instance_seed(ctx.seed, &inst.id))?;
            out.push(json!({"id": inst.id, "tokens": inst.tokens, "plan": plan}));
        }
    }
    ctx.emit(&to_jsonl(&out)?)
}

fn cmd_export(ctx: &Ctx, data: &DataArgs, premise: &PremiseArgs, mask: &MaskArgs, vocab_out: Option<&Path>) -> Result<()> {
    let (strategy, ratio) = ctx.mask(mask)?;
    let lexicon = crate::annotate::PosLexicon::builtin();
    let instances = cloze_instances(ctx, data, premise)?;
    let records: Vec<BatchRecord> = instances
        .par_iter()
        .map(|i| export_instance(i, &lexicon, strategy, ratio, instance_seed(ctx.seed, &i.id)))
        .collect::<Result<_>>()?;
    if let Some(path) = vocab_out {
        let vocab = Vocab::from_instances(&instances);
        let mut text = vocab.tokens().join("\n");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    ctx.emit(&to_jsonl(&records)?)
}

fn cmd_probe_gen(
    ctx: &Ctx,
    data: &DataArgs,
    premise: &PremiseArgs,
    resources: &ResourceArgs,
    with_premise: bool,
    all_spans: bool,
    types: Option<&str>,
) -> Result<()> {
    let annotator = ctx.annotator(resources)?;
    let builder = ctx.premise(premise)?;
    let selection = if all_spans { SpanSelection::All } else { SpanSelection::Sampled };
    let mut kinds = Vec::new();
    for t in types.unwrap_or("factual,relational").split(',').map(str::trim) {
        kinds.push(match t {
            "factual" => KnowledgeType::Factual,
            "relational" => KnowledgeType::Relational,
            other => return Err(ForgeError::validation(format!("unknown knowledge type {other:?}"))),
        });
    }
    let pairs: Vec<Pair> = ctx.load_pairs(data)?.into_iter().filter(|p| p.hypothesis.label != Label::Neutral).collect();
    let per_pair: Vec<(Vec<Prompt>, usize)> = pairs
        .par_iter()
        .map(|pair| {
            let a = annotator.annotate(&pair.hypothesis.text);
            let mut prompts = Vec::new();
            let mut skipped = 0;
            for k in &kinds {
                let ps = match k {
                    KnowledgeType::Factual => gen_factual_prompts(pair, &a, ctx.seed, selection)?,
                    KnowledgeType::Relational => gen_relational_prompts(pair, &a, &annotator, ctx.seed, selection)?,
                };
                if ps.is_empty() {
                    skipped += 1;
                }
                prompts.extend(ps);
            }
            if with_premise {
                let text = builder.build(&pair.table, Some(&pair.hypothesis.text))?;
                let composed: Vec<Prompt> = prompts.iter().map(|p| compose_with_premise(p, &text)).collect::<Result<_>>()?;
                for mut p in composed {
                    p.id.push_str("/premise");
                    prompts.push(p);
                }
            }
            Ok((prompts, skipped))
        })
        .collect::<Result<_>>()?;
    let skipped: usize = per_pair.iter().map(|p| p.1).sum();
    let prompts: Vec<Prompt> = per_pair.into_iter().flat_map(|p| p.0).collect();
    eprintln!("forge: {} prompts, {} skipped (no candidate span)", prompts.len(), skipped);
    ctx.emit(&to_jsonl(&prompts)?)
}

fn parse_ks(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|k| k.trim().parse::<usize>().map_err(|_| ForgeError::validation(format!("bad k value {k:?}"))))
        .collect()
}

fn cmd_probe_score(ctx: &Ctx, prompts: &Path, predictions: &Path, k: Option<&str>) -> Result<()> {
    let prompts: Vec<Prompt> = from_jsonl(&read_string(prompts)?)?;
    let preds: Vec<Prediction> = from_jsonl(&read_string(predictions)?)?;
    let ks = match k {
        Some(s) => parse_ks(s)?,
        None => ctx.cfg.k.clone().unwrap_or_else(|| vec![1, 5]),
    };
    let (score, missing) = score_all(&prompts, &preds, ks)?;
    if !missing.is_empty() {
        eprintln!("forge: {} prompts without predictions", missing.len());
    }
    ctx.emit(&score.render_tsv())
}

#[allow(clippy::too_many_arguments)]
fn cmd_perturb(
    ctx: &Ctx,
    data: &DataArgs,
    resources: &ResourceArgs,
    kinds: Option<&str>,
    paraphrase: Option<&str>,
    paraphrase_map: Option<&Path>,
    names: Option<&Path>,
    n_ops: Option<usize>,
    negation_contradiction: Option<&str>,
    dropped: Option<&Path>,
) -> Result<()> {
    let kinds = match kinds {
        Some(k) => parse_kinds(k)?,
        None => match &ctx.cfg.kinds {
            Some(list) => parse_kinds(&list.join(","))?,
            None => return Err(ForgeError::validation("--kinds is required")),
        },
    };
    let mut perturber = Perturber { annotator: ctx.annotator(resources)?, ..Perturber::builtin() };
    if let Some(path) = names {
        perturber.names = parse_names(&read_string(path)?);
    }
    if let Some(n) = n_ops.or(ctx.cfg.n_ops) {
        perturber.char_ops = n;
    }
    let map_path = paraphrase_map.map(Path::to_path_buf).or_else(|| ctx.cfg.paths.paraphrase_map.clone());
    let provider = paraphrase.or(ctx.cfg.paraphrase.as_deref()).unwrap_or(if map_path.is_some() { "file" } else { "rule" });
    perturber.paraphrase = match provider {
        "rule" => ParaphraseProvider::RuleFronting,
        "identity" => ParaphraseProvider::Identity,
        "file" => {
            let path = map_path.ok_or_else(|| ForgeError::validation("file paraphrase provider needs --paraphrase-map"))?;
            ParaphraseProvider::FileMap(ParaphraseMap::from_tsv(&read_string(&path)?)?)
        }
        other => return Err(ForgeError::validation(format!("unknown paraphrase provider {other:?}"))),
    };
    if let Some(rule) = negation_contradiction.or(ctx.cfg.negation_contradiction.as_deref()) {
        let outcome = match rule {
            "drop" | "dropped" => Transition::Drop,
            l => Transition::To(Label::from_str(l)?),
        };
        perturber.rules = TransitionRule::with_negated_contradiction(outcome);
    }
    let hyps = ctx.load_hypotheses(data)?;
    let records: Vec<PerturbationRecord> = hyps
        .par_iter()
        .map(|h| {
            let pr = PairRef { table_id: h.table_id.clone(), hyp_id: h.hyp_id.clone() };
            perturber.compose(&pr, &h.text, h.label, &kinds, ctx.seed)
        })
        .collect::<Result<_>>()?;
    let (drops, kept): (Vec<_>, Vec<_>) = records.into_iter().partition(PerturbationRecord::is_dropped);
    eprintln!("forge: {} kept, {} dropped", kept.len(), drops.len());
    if let Some(path) = dropped {
        write_atomic(path, to_jsonl(&drops)?.as_bytes())?;
    }
    ctx.emit(&to_jsonl(&kept)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_toy(
    ctx: &Ctx,
    data: &DataArgs,
    premise: &PremiseArgs,
    synthetic: Option<usize>,
    embed_dim: Option<usize>,
    learning_rate: Option<f64>,
    steps: Option<usize>,
    ratio: Option<f64>,
    predictions_out: Option<&Path>,
) -> Result<()> {
    let instances = match synthetic {
        Some(n) => synthetic_rule_dataset(n, ctx.seed),
        None => cloze_instances(ctx, data, premise)?,
    };
    let defaults = ToyScorerConfig::default();
    let cfg = ToyScorerConfig {
        vocab: Vec::new(),
        embed_dim: embed_dim.or(ctx.cfg.embed_dim).unwrap_or(defaults.embed_dim),
        learning_rate: learning_rate.or(ctx.cfg.learning_rate).unwrap_or(defaults.learning_rate),
        steps: steps.or(ctx.cfg.steps).unwrap_or(defaults.steps),
        seed: ctx.seed,
        mask_ratio: ratio.or(ctx.cfg.ratio).unwrap_or(defaults.mask_ratio),
    };
    let outcome = toy_train(&instances, &cfg)?;
    let acc = accuracy_on(&outcome.scorer, &instances)?;
    if let Some(path) = predictions_out {
        let mut set = PredictionSet::new("toy", "train");
        for inst in &instances {
            let pr = PairRef::from_str(&inst.id).unwrap_or(PairRef { table_id: "synthetic".into(), hyp_id: inst.id.clone() });
            set.entries.insert(pr, predict_label(&outcome.scorer, inst)?);
        }
        write_atomic(path, crate::metrics::write_predictions(&set).as_bytes())?;
    }
    let summary = json!({
        "instances": instances.len(),
        "steps": cfg.steps,
        "embed_dim": cfg.embed_dim,
        "learning_rate": cfg.learning_rate,
        "seed": cfg.seed,
        "initial_loss": outcome.loss_trace.first(),
        "final_loss": outcome.final_loss(),
        "accuracy": acc,
        "loss_trace": outcome.loss_trace,
    });
    ctx.emit(&format!("{}\n", serde_json::to_string_pretty(&summary)?))
}

fn cmd_score(ctx: &Ctx, batches: &Path, logits: &Path, vocab: &Path, predictions_out: Option<&Path>) -> Result<()> {
    let batches: Vec<BatchRecord> = from_jsonl(&read_string(batches)?)?;
    let logits: Vec<LogitRecord> = from_jsonl(&read_string(logits)?)?;
    let vocab = Vocab::from_lines(&read_string(vocab)?)?;
    let (scores, missing) = score_batches(&batches, &logits, &vocab)?;
    if !missing.is_empty() {
        eprintln!("forge: {} instances without logits", missing.len());
    }
    if let Some(path) = predictions_out {
        let mut set = PredictionSet::new("external", "scored");
        for s in &scores {
            let pr = PairRef::from_str(&s.id)?;
            set.entries.insert(pr, s.predicted);
        }
        write_atomic(path, crate::metrics::write_predictions(&set).as_bytes())?;
    }
    ctx.emit(&to_jsonl(&scores)?)
}

/// Gold labels from a hypothesis TSV, a `pair_ref/label` TSV, or perturbation JSONL.
fn load_gold(path: &Path) -> Result<GoldMap> {
    let raw = read_string(path)?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        let records: Vec<PerturbationRecord> = from_jsonl(&raw)?;
        return Ok(records
            .into_iter()
            .filter_map(|r| match r.new_label {
                Transition::To(l) => Some((r.pair_ref, l)),
                Transition::Drop => None,
            })
            .collect());
    }
    if raw.lines().next().is_some_and(|h| h.split('\t').any(|c| c == "pair_ref")) {
        return Ok(parse_predictions(raw.as_bytes(), "gold", "")?.entries);
    }
    Ok(parse_hypotheses(raw.as_bytes())?
        .into_iter()
        .map(|h| (PairRef { table_id: h.table_id, hyp_id: h.hyp_id }, h.label))
        .collect())
}

fn cmd_report(ctx: &Ctx, manifest: &Path, format: Option<&str>, two: bool, with_confusion: bool) -> Result<()> {
    let format = ReportFormat::from_str(format.unwrap_or("csv"))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let raw = read_string(manifest)?;
    let mut models: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), (f64, crate::metrics::ConfusionMatrix)> = BTreeMap::new();
    let mut sets: Vec<String> = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols.first() == Some(&"set") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let [set, model, gold, preds] = cols[..] else {
            return Err(ForgeError::parse(format!("manifest line {}: expected set, model, gold, predictions", i + 1)));
        };
        let gold_map = load_gold(&base.join(gold))?;
        let mut pred_set = parse_predictions(&read_bytes(&base.join(preds))?, model, set)?;
        let mut gold_map = gold_map;
        if two {
            (pred_set, gold_map) = two_label(&pred_set, &gold_map)?;
        }
        let acc = accuracy(&pred_set, &gold_map).map_err(|e| ForgeError::validation(format!("{set}/{model}: {e}")))?;
        let m = confusion(&pred_set, &gold_map)?;
        if !models.iter().any(|m| m == model) {
            models.push(model.to_string());
        }
        if !sets.iter().any(|s| s == set) {
            sets.push(set.to_string());
        }
        cells.insert((set.to_string(), model.to_string()), (acc, m));
    }
    let mut report = Report { models: models.clone(), rows: Vec::new() };
    for set in &sets {
        let accs = models
            .iter()
            .map(|m| {
                cells
                    .get(&(set.clone(), m.clone()))
                    .map(|c| c.0)
                    .ok_or_else(|| ForgeError::validation(format!("manifest lacks predictions of {m} on {set}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        report.push(set.clone(), accs)?;
    }
    let mut out = render_report(&report, format);
    if with_confusion {
        out.push_str("\nset,model,gold,E,N,C\n");
        for ((set, model), (_, m)) in &cells {
            for (label, row) in Label::ALL.iter().zip(m.counts) {
                out.push_str(&format!("{set},{model},{label},{},{},{}\n", row[0], row[1], row[2]));
            }
        }
    }
    ctx.emit(&out)
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { seed: cli.seed.unwrap_or(cfg.seed), cfg, out: cli.out.clone() };
    match &cli.command {
        Command::Ingest { data, rejects } => cmd_ingest(&ctx, data, rejects.as_deref()),
        Command::Represent { data, premise, hyp_id } => cmd_represent(&ctx, data, premise, hyp_id.as_deref()),
        Command::Mask { data, premise, mask, text } => cmd_mask(&ctx, data, premise, mask, text.as_deref()),
        Command::ExportBatches { data, premise, mask, vocab_out } => cmd_export(&ctx, data, premise, mask, vocab_out.as_deref()),
        Command::ProbeGen { data, premise, resources, with_premise, all_spans, types } => {
            cmd_probe_gen(&ctx, data, premise, resources, *with_premise, *all_spans, types.as_deref())
        }
        Command::ProbeScore { prompts, predictions, k } => cmd_probe_score(&ctx, prompts, predictions, k.as_deref()),
        Command::Perturb { data, resources, kinds, paraphrase, paraphrase_map, names, n_ops, negation_contradiction, dropped } => {
            cmd_perturb(
                &ctx,
                data,
                resources,
                kinds.as_deref(),
                paraphrase.as_deref(),
                paraphrase_map.as_deref(),
                names.as_deref(),
                *n_ops,
                negation_contradiction.as_deref(),
                dropped.as_deref(),
            )
        }
        Command::TrainToy { data, premise, synthetic, embed_dim, learning_rate, steps, ratio, predictions_out } => cmd_train_toy(
            &ctx,
            data,
            premise,
            *synthetic,
            *embed_dim,
            *learning_rate,
            *steps,
            *ratio,
            predictions_out.as_deref(),
        ),
        Command::Score { batches, logits, vocab, predictions_out } => {
            cmd_score(&ctx, batches, logits, vocab, predictions_out.as_deref())
        }
        Command::Report { manifest, format, two_label, confusion } => {
            cmd_report(&ctx, manifest, format.as_deref(), *two_label, *confusion)
        }
    }
}

fn report_error(e: &ForgeError, json_errors: bool) {
    if json_errors {
        let mut obj = json!({"kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()});
        match e {
            ForgeError::Parse { offset: Some(o), .. } => obj["offset"] = json!(o),
            ForgeError::Numerical { step: Some(s), .. } => obj["step"] = json!(s),
            _ => {}
        }
        eprintln!("{}", json!({ "error": obj }));
    } else {
        eprintln!("forge: {e}");
    }
}

/// Run with the given arguments (including the program name); returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if json_errors {
                let msg = e.render().to_string();
                eprintln!("{}", json!({"error": {"kind": "usage", "message": msg.trim_end(), "exit_code": 1}}));
            } else {
                let _ = e.print();
            }
            return 1;
        }
    };
    let json_errors = cli.json_errors;
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e, json_errors);
            e.exit_code()
        }
    }
}

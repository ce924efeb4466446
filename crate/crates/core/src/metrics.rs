//! Accuracy, confusion matrices, model-to-model consistency and report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PairRef;
use crate::error::{ForgeError, Result};
use crate::label::Label;

pub type GoldMap = BTreeMap<PairRef, Label>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_name: String,
    pub split: String,
    pub entries: BTreeMap<PairRef, Label>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>, split: impl Into<String>) -> Self {
        PredictionSet { model_name: model_name.into(), split: split.into(), entries: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// TSV with columns `pair_ref` and `label`, header row first.
pub fn parse_predictions(raw: &[u8], model_name: &str, split: &str) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').quoting(false).from_reader(raw);
    let headers = rdr.headers().map_err(|e| ForgeError::parse(format!("predictions header: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ForgeError::parse(format!("predictions: missing column {name:?}")))
    };
    let (ref_col, label_col) = (col("pair_ref")?, col("label")?);
    let mut set = PredictionSet::new(model_name, split);
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| {
            let offset = e.position().map(|p| p.byte() as usize);
            ForgeError::Parse { message: format!("predictions row {row}: {e}"), offset }
        })?;
        let field = |c: usize| rec.get(c).ok_or_else(|| ForgeError::parse(format!("predictions row {row}: missing field")));
        let pair = PairRef::from_str(field(ref_col)?)?;
        let label = Label::from_str(field(label_col)?)
            .map_err(|e| ForgeError::validation(format!("predictions row {row}: {e}")))?;
        if set.entries.insert(pair.clone(), label).is_some() {
            return Err(ForgeError::validation(format!("predictions row {row}: duplicate {pair}")));
        }
    }
    Ok(set)
}

pub fn write_predictions(set: &PredictionSet) -> String {
    let mut out = String::from("pair_ref\tlabel\n");
    for (k, v) in &set.entries {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

/// Gold × predicted counts, rows and columns in E, N, C order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, row: Label, col: Label) {
        self.counts[row.index()][col.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [u64; 3] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| i == j || self.counts[i][j] == 0))
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

fn check_keys<'a, A, B>(a: &'a BTreeMap<PairRef, A>, b: &'a BTreeMap<PairRef, B>) -> Result<()> {
    if a.len() == b.len() && a.keys().zip(b.keys()).all(|(x, y)| x == y) {
        return Ok(());
    }
    let ka: BTreeSet<&PairRef> = a.keys().collect();
    let kb: BTreeSet<&PairRef> = b.keys().collect();
    let diff: Vec<String> = ka.symmetric_difference(&kb).map(|p| p.to_string()).collect();
    Err(ForgeError::validation(format!("pair sets differ: {}", diff.join(", "))))
}

pub fn confusion(preds: &PredictionSet, gold: &GoldMap) -> Result<ConfusionMatrix> {
    check_keys(&preds.entries, gold)?;
    let mut m = ConfusionMatrix::default();
    for (k, g) in gold {
        m.add(*g, preds.entries[k]);
    }
    Ok(m)
}

/// Fraction of exact matches. An empty set scores 0.
pub fn accuracy(preds: &PredictionSet, gold: &GoldMap) -> Result<f64> {
    let m = confusion(preds, gold)?;
    Ok(if m.total() == 0 { 0.0 } else { m.trace() as f64 / m.total() as f64 })
}

/// Cell (x, y) counts pairs where model A says x and model B says y.
pub fn consistency_graph(a: &PredictionSet, b: &PredictionSet) -> Result<ConfusionMatrix> {
    check_keys(&a.entries, &b.entries)?;
    let mut m = ConfusionMatrix::default();
    for (k, x) in &a.entries {
        m.add(*x, b.entries[k]);
    }
    Ok(m)
}

/// E-vs-C view: drops every pair whose gold or prediction is N.
pub fn two_label(preds: &PredictionSet, gold: &GoldMap) -> Result<(PredictionSet, GoldMap)> {
    check_keys(&preds.entries, gold)?;
    let keep = |k: &PairRef| gold[k] != Label::Neutral && preds.entries[k] != Label::Neutral;
    let mut p = PredictionSet::new(preds.model_name.clone(), preds.split.clone());
    p.entries = preds.entries.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect();
    let g = gold.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect();
    Ok((p, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(ForgeError::validation(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Accuracy in [0, 1], one per model column.
    pub accuracies: Vec<f64>,
}

/// Per-set accuracies for several models. The first model is the baseline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub models: Vec<String>,
    pub rows: Vec<ReportRow>,
}

pub const RANDOM_ROW: &str = "random";
pub const RANDOM_ACCURACY: f64 = 1.0 / 3.0;

impl Report {
    pub fn push(&mut self, name: impl Into<String>, accuracies: Vec<f64>) -> Result<()> {
        if accuracies.len() != self.models.len() {
            return Err(ForgeError::validation(format!(
                "report row has {} values for {} models",
                accuracies.len(),
                self.models.len()
            )));
        }
        self.rows.push(ReportRow { name: name.into(), accuracies });
        Ok(())
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Rows sorted ascending by baseline accuracy (name breaks ties), then a
/// random-chance row. Empty reports render as the header alone.
pub fn render_report(report: &Report, format: ReportFormat) -> String {
    let mut rows: Vec<&ReportRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        let x = a.accuracies.first().copied().unwrap_or(0.0);
        let y = b.accuracies.first().copied().unwrap_or(0.0);
        x.total_cmp(&y).then_with(|| a.name.cmp(&b.name))
    });
    let random = ReportRow { name: RANDOM_ROW.into(), accuracies: vec![RANDOM_ACCURACY; report.models.len()] };
    if !rows.is_empty() {
        rows.push(&random);
    }
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("perturbation");
            for m in &report.models {
                out.push(',');
                out.push_str(&csv_field(m));
            }
            out.push('\n');
            for r in rows {
                out.push_str(&csv_field(&r.name));
                for a in &r.accuracies {
                    out.push(',');
                    out.push_str(&pct(*a));
                }
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| perturbation | {} |", report.models.join(" | "));
            let _ = writeln!(out, "|---|{}", "---:|".repeat(report.models.len()));
            for r in rows {
                let cells: Vec<String> = r.accuracies.iter().map(|a| pct(*a)).collect();
                let _ = writeln!(out, "| {} | {} |", r.name, cells.join(" | "));
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(i: usize) -> PairRef {
        PairRef { table_id: format!("T{}", i / 9), hyp_id: format!("h{i}") }
    }

    fn sets(gold: &[Label], pred: &[Label]) -> (PredictionSet, GoldMap) {
        let mut p = PredictionSet::new("m", "dev");
        let mut g = GoldMap::new();
        for (i, (a, b)) in gold.iter().zip(pred).enumerate() {
            g.insert(pr(i), *a);
            p.entries.insert(pr(i), *b);
        }
        (p, g)
    }

    use Label::*;

    #[test]
    fn two_of_three() {
        let (p, g) = sets(&[Entailment, Neutral, Contradiction], &[Entailment, Neutral, Entailment]);
        assert!((accuracy(&p, &g).unwrap() - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn all_e_first_column() {
        let gold: Vec<Label> = (0..9).map(|i| Label::ALL[i % 3]).collect();
        let (p, g) = sets(&gold, &[Entailment; 9]);
        let m = confusion(&p, &g).unwrap();
        assert_eq!(m.counts, [[3, 0, 0], [3, 0, 0], [3, 0, 0]]);
        assert_eq!(m.row_sums(), [3, 3, 3]);
    }

    #[test]
    fn key_mismatch_lists_difference() {
        let (p, mut g) = sets(&[Entailment], &[Entailment]);
        g.insert(pr(5), Neutral);
        match accuracy(&p, &g) {
            Err(ForgeError::Validation(m)) => assert!(m.contains("T0/h5"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn consistency_cells() {
        let (a, _) = sets(&[Entailment; 4], &[Entailment; 4]);
        let (b, _) = sets(&[Entailment; 4], &[Neutral; 4]);
        let m = consistency_graph(&a, &b).unwrap();
        assert_eq!(m.counts[0][1], 4);
        assert_eq!(m.total(), 4);
        assert!(consistency_graph(&a, &a).unwrap().is_diagonal());
    }

    #[test]
    fn two_label_filters_neutral() {
        let (p, g) = sets(&[Entailment, Neutral, Contradiction, Entailment], &[Entailment, Entailment, Neutral, Contradiction]);
        let (p2, g2) = two_label(&p, &g).unwrap();
        assert_eq!(p2.len(), 2);
        assert_eq!(accuracy(&p2, &g2).unwrap(), 0.5);
    }

    #[test]
    fn report_ordering_and_empty() {
        let mut r = Report { models: vec!["base".into()], rows: vec![] };
        assert_eq!(render_report(&r, ReportFormat::Csv), "perturbation,base\n");
        r.push("neg", vec![0.7]).unwrap();
        r.push("num", vec![0.2]).unwrap();
        assert_eq!(render_report(&r, ReportFormat::Csv), "perturbation,base\nnum,20.00\nneg,70.00\nrandom,33.33\n");
        let md = render_report(&r, ReportFormat::Markdown);
        assert!(md.starts_with("| perturbation | base |\n|---|---:|\n| num | 20.00 |"));
        assert!(r.push("bad", vec![]).is_err());
    }

    #[test]
    fn prediction_tsv_round_trip() {
        let (p, _) = sets(&[Entailment, Neutral], &[Contradiction, Neutral]);
        let back = parse_predictions(write_predictions(&p).as_bytes(), "m", "dev").unwrap();
        assert_eq!(back, p);
        assert!(matches!(parse_predictions(b"pair_ref\tlabel\nT/h\tQ\n", "m", "d"), Err(ForgeError::Validation(_))));
        assert!(matches!(parse_predictions(b"ref\tlabel\n", "m", "d"), Err(ForgeError::Parse { .. })));
    }
}

//! Tables, hypotheses and their join into premise/hypothesis pairs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{line_col_to_offset, ForgeError, Result};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub key: String,
    pub values: Vec<String>,
}

impl Row {
    pub fn new(key: impl Into<String>, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Row { key: key.into(), values: values.into_iter().map(Into::into).collect() }
    }
}

/// An entity table: a title, a category and ordered key/values rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub table_id: String,
    pub title: String,
    #[serde(default)]
    pub category: String,
    pub rows: Vec<Row>,
}

impl Table {
    /// Canonical JSON encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    CanonicalJson,
    InfotabsJson,
}

impl FromStr for TableFormat {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" | "canonical_json" => Ok(TableFormat::CanonicalJson),
            "infotabs" | "infotabs_json" => Ok(TableFormat::InfotabsJson),
            other => Err(ForgeError::validation(format!("unknown table format {other:?}"))),
        }
    }
}

fn json_error(raw: &[u8], e: serde_json::Error) -> ForgeError {
    ForgeError::parse_at(e.to_string(), line_col_to_offset(raw, e.line(), e.column()))
}

fn validate_table(mut table: Table) -> Result<Table> {
    if table.title.trim().is_empty() {
        return Err(ForgeError::validation("table title is empty"));
    }
    if table.rows.is_empty() {
        return Err(ForgeError::validation(format!("table {:?} has no rows", table.table_id)));
    }
    for row in &mut table.rows {
        row.values.retain(|v| !v.trim().is_empty());
        if row.values.is_empty() {
            return Err(ForgeError::validation(format!("row {:?} has no non-empty value", row.key)));
        }
    }
    Ok(table)
}

/// Parse one table document.
///
/// `infotabs_json` documents map each key to a list of value strings; the
/// `title` key (string or one-element list) and the optional `table_id` and
/// `category` keys are lifted out of the row set.
pub fn parse_table(raw: &[u8], format: TableFormat) -> Result<Table> {
    match format {
        TableFormat::CanonicalJson => {
            let table: Table = serde_json::from_slice(raw).map_err(|e| json_error(raw, e))?;
            validate_table(table)
        }
        TableFormat::InfotabsJson => {
            let doc: serde_json::Map<String, serde_json::Value> =
                serde_json::from_slice(raw).map_err(|e| json_error(raw, e))?;
            let mut table = Table {
                table_id: String::new(),
                title: String::new(),
                category: String::new(),
                rows: Vec::new(),
            };
            for (key, value) in doc {
                let values = match value {
                    serde_json::Value::String(s) => vec![s],
                    serde_json::Value::Array(items) => items
                        .into_iter()
                        .map(|v| match v {
                            serde_json::Value::String(s) => Ok(s),
                            other => Ok(other.to_string()),
                        })
                        .collect::<Result<Vec<_>>>()?,
                    other => {
                        return Err(ForgeError::parse(format!(
                            "key {key:?}: expected string or list of strings, found {other}"
                        )))
                    }
                };
                match key.as_str() {
                    "title" => table.title = values.join(" "),
                    "table_id" => table.table_id = values.join(" "),
                    "category" => table.category = values.join(" "),
                    _ => table.rows.push(Row { key, values }),
                }
            }
            validate_table(table)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub hyp_id: String,
    pub table_id: String,
    pub text: String,
    pub label: Label,
}

/// Parse a hypothesis TSV with header `hyp_id table_id text label`.
///
/// The InfoTabS column names `index` and `hypothesis` are accepted as aliases.
pub fn parse_hypotheses(raw: &[u8]) -> Result<Vec<Hypothesis>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .flexible(true)
        .from_reader(raw);
    let headers = reader
        .headers()
        .map_err(|e| ForgeError::parse(format!("hypothesis header: {e}")))?
        .clone();
    let column = |names: &[&str]| -> Result<usize> {
        headers
            .iter()
            .position(|h| names.contains(&h.trim()))
            .ok_or_else(|| ForgeError::parse(format!("missing column {:?}", names[0])))
    };
    let (id_col, table_col, text_col, label_col) = (
        column(&["hyp_id", "index"])?,
        column(&["table_id"])?,
        column(&["text", "hypothesis"])?,
        column(&["label"])?,
    );
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_number = i + 2;
        let record = record.map_err(|e| {
            let offset = e.position().map(|p| p.byte() as usize);
            ForgeError::Parse { message: format!("row {row_number}: {e}"), offset }
        })?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| {
                ForgeError::Parse {
                    message: format!("row {row_number}: missing column {col}"),
                    offset: record.position().map(|p| p.byte() as usize),
                }
            })
        };
        let label: Label = field(label_col)?
            .parse()
            .map_err(|e| ForgeError::validation(format!("row {row_number}: {e}")))?;
        let text = field(text_col)?.trim().to_string();
        if text.is_empty() {
            return Err(ForgeError::validation(format!("row {row_number}: empty hypothesis text")));
        }
        out.push(Hypothesis {
            hyp_id: field(id_col)?.trim().to_string(),
            table_id: field(table_col)?.trim().to_string(),
            text,
            label,
        });
    }
    Ok(out)
}

/// Serialize hypotheses back to the TSV format read by [`parse_hypotheses`].
pub fn write_hypotheses(hyps: &[Hypothesis]) -> String {
    let mut out = String::from("hyp_id\ttable_id\ttext\tlabel\n");
    for h in hyps {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", h.hyp_id, h.table_id, h.text, h.label));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    A1,
    A2,
    A3,
}

impl FromStr for Split {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "a1" | "alpha1" | "α1" => Ok(Split::A1),
            "a2" | "alpha2" | "α2" => Ok(Split::A2),
            "a3" | "alpha3" | "α3" => Ok(Split::A3),
            other => Err(ForgeError::validation(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::A1 => "a1",
            Split::A2 => "a2",
            Split::A3 => "a3",
        })
    }
}

/// Stable reference to a table/hypothesis pair, rendered as `table_id/hyp_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairRef {
    pub table_id: String,
    pub hyp_id: String,
}

impl fmt::Display for PairRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.table_id, self.hyp_id)
    }
}

impl FromStr for PairRef {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once('/') {
            Some((t, h)) if !t.is_empty() && !h.is_empty() => {
                Ok(PairRef { table_id: t.to_string(), hyp_id: h.to_string() })
            }
            _ => Err(ForgeError::validation(format!("pair reference {s:?} is not table_id/hyp_id"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub table: Table,
    pub hypothesis: Hypothesis,
    pub split: Split,
}

impl Pair {
    pub fn pair_ref(&self) -> PairRef {
        PairRef { table_id: self.table.table_id.clone(), hyp_id: self.hypothesis.hyp_id.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub hyp_id: String,
    pub table_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct JoinResult {
    pub pairs: Vec<Pair>,
    pub rejects: Vec<Reject>,
}

/// One pair per hypothesis whose table resolves, in hypothesis order.
pub fn join_pairs(tables: &[Table], hyps: &[Hypothesis], split: Split) -> JoinResult {
    let by_id: HashMap<&str, &Table> = tables.iter().map(|t| (t.table_id.as_str(), t)).collect();
    let mut result = JoinResult::default();
    for h in hyps {
        match by_id.get(h.table_id.as_str()) {
            Some(table) => result.pairs.push(Pair {
                table: (*table).clone(),
                hypothesis: h.clone(),
                split,
            }),
            None => result.rejects.push(Reject {
                hyp_id: h.hyp_id.clone(),
                table_id: h.table_id.clone(),
                reason: "table not found".into(),
            }),
        }
    }
    result
}

//! Table → premise text: universal template, category/key templates (BPR),
//! linearization, and distracting-row removal (DRR).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Row, Table};
use crate::error::{ForgeError, Result};
use crate::stem::{common_prefix_len, stem};
use crate::text::{capitalize_first, is_word, tokenize};

pub const UNIVERSAL_TEMPLATE: &str = "The $key$ of $title$ is $value$";

const WILDCARD: &str = "*";

/// Sentence templates keyed by (category, key); `*` matches anything.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDb {
    entries: HashMap<(String, String), String>,
}

impl Default for TemplateDb {
    fn default() -> Self {
        let mut entries = HashMap::new();
        entries.insert((WILDCARD.to_string(), WILDCARD.to_string()), UNIVERSAL_TEMPLATE.to_string());
        TemplateDb { entries }
    }
}

impl TemplateDb {
    /// Load a TSV of `category key template`. A missing `(*, *)` entry is
    /// filled with the universal template.
    pub fn from_tsv(raw: &str) -> Result<Self> {
        let mut db = TemplateDb::default();
        for (i, line) in raw.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(ForgeError::parse(format!("template line {}: expected 3 columns", i + 1)));
            }
            if i == 0 && cols[0] == "category" && cols[1] == "key" {
                continue;
            }
            db.insert(cols[0], cols[1], cols[2])?;
        }
        Ok(db)
    }

    /// Templates shipped with the crate.
    pub fn builtin() -> Self {
        TemplateDb::from_tsv(include_str!("../data/bpr_templates.tsv")).expect("built-in templates are valid")
    }

    pub fn insert(&mut self, category: &str, key: &str, template: &str) -> Result<()> {
        if !template.contains("$value$") {
            return Err(ForgeError::validation(format!(
                "template for ({category}, {key}) has no $value$ placeholder"
            )));
        }
        self.entries.insert((norm(category), norm(key)), template.to_string());
        Ok(())
    }

    /// Most specific template: (category, key) > (*, key) > (*, *).
    pub fn lookup(&self, category: &str, key: &str) -> &str {
        let (c, k) = (norm(category), norm(key));
        self.entries
            .get(&(c, k.clone()))
            .or_else(|| self.entries.get(&(WILDCARD.to_string(), k)))
            .or_else(|| self.entries.get(&(WILDCARD.to_string(), WILDCARD.to_string())))
            .map(String::as_str)
            .unwrap_or(UNIVERSAL_TEMPLATE)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn norm(s: &str) -> String {
    let t = s.trim();
    if t == WILDCARD {
        WILDCARD.to_string()
    } else {
        t.to_lowercase()
    }
}

fn fill(template: &str, title: &str, row: &Row) -> String {
    let sentence = template
        .replace("$title$", title)
        .replace("$key$", &row.key.to_lowercase())
        .replace("$value$", &row.values.join(", "));
    let mut sentence = capitalize_first(sentence.trim());
    if !sentence.ends_with(['.', '!', '?']) {
        sentence.push('.');
    }
    sentence
}

pub fn render_universal(table: &Table) -> String {
    table
        .rows
        .iter()
        .map(|row| fill(UNIVERSAL_TEMPLATE, &table.title, row))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_bpr(table: &Table, templates: &TemplateDb) -> String {
    table
        .rows
        .iter()
        .map(|row| fill(templates.lookup(&table.category, &row.key), &table.title, row))
        .collect::<Vec<_>>()
        .join(" ")
}

const ROW_SEP: &str = " ; ";
const VALUE_SEP: &str = " , ";
const KV_SEP: &str = " : ";

fn check_field(field: &str, what: &str, row: usize, is_key: bool) -> Result<()> {
    let bad = |why: &str| Err(ForgeError::validation(format!("row {row}: {what} {field:?} {why}")));
    if field.is_empty() {
        return bad("is empty");
    }
    if field.trim() != field {
        return bad("has leading or trailing whitespace");
    }
    for sep in [ROW_SEP, VALUE_SEP] {
        if field.contains(sep) {
            return bad(&format!("contains reserved separator {sep:?}"));
        }
    }
    if field.ends_with(" ;") || field.ends_with(" ,") || field.starts_with("; ") || field.starts_with(", ") {
        return bad("would merge with a separator");
    }
    if is_key && (field.contains(KV_SEP) || field.ends_with(" :")) {
        return bad("contains reserved separator \" : \"");
    }
    Ok(())
}

/// `title : <title> ; <key> : <v1> , <v2> ; ...`
pub fn linearize(table: &Table) -> Result<String> {
    check_field(&table.title, "title", 0, true)?;
    let mut out = format!("title{KV_SEP}{}", table.title);
    for (i, row) in table.rows.iter().enumerate() {
        check_field(&row.key, "key", i, true)?;
        if row.values.is_empty() {
            return Err(ForgeError::validation(format!("row {i}: key {:?} has no values", row.key)));
        }
        for v in &row.values {
            check_field(v, "value", i, false)?;
        }
        out.push_str(ROW_SEP);
        out.push_str(&row.key);
        out.push_str(KV_SEP);
        out.push_str(&row.values.join(VALUE_SEP));
    }
    Ok(out)
}

/// Inverse of [`linearize`]. Category and table id are not encoded and come back empty.
pub fn parse_linearized(text: &str) -> Result<Table> {
    let mut segments = text.split(ROW_SEP);
    let head = segments.next().unwrap_or_default();
    let title = head
        .strip_prefix("title")
        .and_then(|rest| rest.strip_prefix(KV_SEP))
        .ok_or_else(|| ForgeError::parse("segment 0: expected \"title : <title>\""))?;
    let mut rows = Vec::new();
    for (i, segment) in segments.enumerate() {
        let (key, values) = segment
            .split_once(KV_SEP)
            .ok_or_else(|| ForgeError::parse(format!("segment {}: missing \" : \"", i + 1)))?;
        if key.is_empty() || values.is_empty() {
            return Err(ForgeError::parse(format!("segment {}: empty key or value", i + 1)));
        }
        rows.push(Row { key: key.to_string(), values: values.split(VALUE_SEP).map(str::to_string).collect() });
    }
    Ok(Table { table_id: String::new(), title: title.to_string(), category: String::new(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowScore {
    pub row_index: usize,
    pub score: f64,
}

/// Relevance of each table row to a hypothesis.
pub trait RowScorer {
    fn score_rows(&self, table: &Table, hypothesis: &str) -> Vec<RowScore>;
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "from", "and", "or", "but",
    "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do", "does", "did",
    "it", "its", "this", "that", "these", "those", "as", "than", "then", "there", "which", "who",
    "whom", "whose", "he", "she", "they", "his", "her", "their", "not", "no", "only", "also", "so",
    "if", "into", "over", "under", "more", "less", "most", "least", "very", "can", "could", "will",
    "would", "should", "may", "might", "must",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word.to_lowercase().as_str())
}

fn word_stems(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| is_word(&t.text)).map(|t| stem(&t.text)).collect()
}

/// Lexical alignment: stem match weighted by IDF.
///
/// `score(row) = Σ_h idf(h) · max_r sim(h, r)` over hypothesis content tokens
/// `h` and row tokens `r` (key, values and title), with `sim` = 1 for equal
/// stems, 0.5 for a shared stem prefix of at least 4 characters, else 0.
#[derive(Debug, Clone, Default)]
pub struct LexicalScorer {
    /// Lowercased word → weight. Missing words weigh 1.
    pub idf: HashMap<String, f64>,
}

impl LexicalScorer {
    pub fn new(idf: HashMap<String, f64>) -> Self {
        LexicalScorer { idf }
    }

    /// Parse a `word<TAB>weight` TSV.
    pub fn idf_from_tsv(raw: &str) -> Result<HashMap<String, f64>> {
        let mut idf = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, weight) = line
                .split_once('\t')
                .ok_or_else(|| ForgeError::parse(format!("idf line {}: expected word<TAB>weight", i + 1)))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| ForgeError::parse(format!("idf line {}: bad weight {weight:?}", i + 1)))?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(ForgeError::validation(format!("idf line {}: weight must be finite and ≥ 0", i + 1)));
            }
            idf.insert(word.trim().to_lowercase(), weight);
        }
        Ok(idf)
    }

    fn weight(&self, word: &str) -> f64 {
        self.idf.get(&word.to_lowercase()).copied().unwrap_or(1.0)
    }
}

pub fn similarity(a: &str, b: &str) -> f64 {
    if a == b {
        1.0
    } else if common_prefix_len(a, b) >= 4 {
        0.5
    } else {
        0.0
    }
}

impl RowScorer for LexicalScorer {
    fn score_rows(&self, table: &Table, hypothesis: &str) -> Vec<RowScore> {
        let content: Vec<(f64, String)> = tokenize(hypothesis)
            .into_iter()
            .filter(|t| is_word(&t.text) && !is_stopword(&t.text))
            .map(|t| (self.weight(&t.text), stem(&t.text)))
            .collect();
        let title = word_stems(&table.title);
        table
            .rows
            .iter()
            .enumerate()
            .map(|(row_index, row)| {
                let mut row_tokens = word_stems(&row.key);
                for v in &row.values {
                    row_tokens.extend(word_stems(v));
                }
                row_tokens.extend(title.iter().cloned());
                let score = content
                    .iter()
                    .map(|(w, h)| w * row_tokens.iter().map(|r| similarity(h, r)).fold(0.0, f64::max))
                    .sum();
                RowScore { row_index, score }
            })
            .collect()
    }
}

pub fn score_rows(table: &Table, hypothesis: &str, idf: &HashMap<String, f64>) -> Vec<RowScore> {
    LexicalScorer::new(idf.clone()).score_rows(table, hypothesis)
}

/// Indices of the `k` best rows (ties toward earlier rows), in table order.
pub fn top_k_rows(scores: &[RowScore], k: usize) -> Vec<usize> {
    let mut ranked: Vec<&RowScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.row_index.cmp(&b.row_index)));
    let mut keep: Vec<usize> = ranked.into_iter().take(k).map(|s| s.row_index).collect();
    keep.sort_unstable();
    keep
}

/// Keep the `k` most relevant rows; the title is always kept and never counted.
pub fn drr_with(table: &Table, hypothesis: &str, k: usize, scorer: &dyn RowScorer) -> Result<Table> {
    if k == 0 {
        return Err(ForgeError::validation("drr: k must be ≥ 1"));
    }
    if table.rows.len() <= k {
        return Ok(table.clone());
    }
    let keep = top_k_rows(&scorer.score_rows(table, hypothesis), k);
    Ok(Table { rows: keep.into_iter().map(|i| table.rows[i].clone()).collect(), ..table.clone() })
}

pub fn drr(table: &Table, hypothesis: &str, k: usize, idf: &HashMap<String, f64>) -> Result<Table> {
    drr_with(table, hypothesis, k, &LexicalScorer::new(idf.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    Universal,
    Bpr,
    Linearize,
}

impl std::str::FromStr for RenderMode {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "universal" => Ok(RenderMode::Universal),
            "bpr" => Ok(RenderMode::Bpr),
            "linearize" | "linearized" => Ok(RenderMode::Linearize),
            other => Err(ForgeError::validation(format!("unknown render mode {other:?}"))),
        }
    }
}

pub fn render(table: &Table, mode: RenderMode, templates: &TemplateDb) -> Result<String> {
    match mode {
        RenderMode::Universal => Ok(render_universal(table)),
        RenderMode::Bpr => Ok(render_bpr(table, templates)),
        RenderMode::Linearize => linearize(table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breakfast() -> Table {
        Table {
            table_id: "T7".into(),
            title: "Breakfast in America".into(),
            category: "Album".into(),
            rows: vec![
                Row::new("Released", ["29 March 1979"]),
                Row::new("Recorded", ["May–December 1978"]),
                Row::new("Studio", ["The Village Recorder in LA"]),
                Row::new("Genre", ["Pop", "art rock", "soft rock"]),
                Row::new("Length", ["46:06"]),
                Row::new("Label", ["A&M"]),
                Row::new("Producer", ["Peter Henderson", "Supertramp"]),
            ],
        }
    }

    fn first_rows(n: usize) -> Table {
        let mut t = breakfast();
        t.rows.truncate(n);
        t
    }

    #[test]
    fn universal_released_row() {
        assert_eq!(
            render_universal(&first_rows(1)),
            "The released of Breakfast in America is 29 March 1979."
        );
    }

    #[test]
    fn universal_multi_value_and_empty() {
        let mut t = breakfast();
        t.rows = vec![t.rows[3].clone()];
        assert_eq!(render_universal(&t), "The genre of Breakfast in America is Pop, art rock, soft rock.");
        t.rows.clear();
        assert_eq!(render_universal(&t), "");
    }

    #[test]
    fn bpr_prefers_specific_templates() {
        let mut db = TemplateDb::default();
        db.insert("Album", "Released", "$title$ was released on $value$.").unwrap();
        db.insert("*", "Studio", "$title$ was recorded at $value$.").unwrap();
        let t = breakfast();
        let text = render_bpr(&Table { rows: t.rows[..3].to_vec(), ..t.clone() }, &db);
        assert_eq!(
            text,
            "Breakfast in America was released on 29 March 1979. \
             The recorded of Breakfast in America is May–December 1978. \
             Breakfast in America was recorded at The Village Recorder in LA."
        );
    }

    #[test]
    fn template_tsv_requires_value_placeholder() {
        assert!(TemplateDb::from_tsv("Album\tReleased\t$title$ was released.").is_err());
        let db = TemplateDb::from_tsv("category\tkey\ttemplate\nAlbum\tReleased\t$title$ was released on $value$.\n").unwrap();
        assert_eq!(db.lookup("album", "released"), "$title$ was released on $value$.");
        assert_eq!(db.lookup("Person", "Born"), UNIVERSAL_TEMPLATE);
    }

    #[test]
    fn linearize_first_two_rows() {
        let t = first_rows(2);
        let text = linearize(&t).unwrap();
        assert_eq!(text, "title : Breakfast in America ; Released : 29 March 1979 ; Recorded : May–December 1978");
        let back = parse_linearized(&text).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.title, t.title);
        assert_eq!(back.category, "");
    }

    #[test]
    fn linearize_single_and_reserved() {
        let t = Table { table_id: String::new(), title: "T".into(), category: String::new(), rows: vec![Row::new("K", ["V"])] };
        assert_eq!(linearize(&t).unwrap(), "title : T ; K : V");
        let bad = Table { rows: vec![Row::new("K", ["a ; b"])], ..t };
        assert!(matches!(linearize(&bad), Err(ForgeError::Validation(m)) if m.contains("row 0")));
    }

    #[test]
    fn parse_linearized_edges() {
        assert!(parse_linearized("title : T").unwrap().rows.is_empty());
        assert!(matches!(parse_linearized("title : T ; K"), Err(ForgeError::Parse { .. })));
    }

    #[test]
    fn scores_match_hand_oracle_for_california() {
        // Hand count: content stems {breakfast, america, record, california};
        // title supplies breakfast+america to every row (2.0). "recorded"
        // matches key Recorded and value "Recorder" (both stem to "record").
        let scores = score_rows(&breakfast(), "Breakfast in America is recorded in California.", &HashMap::new());
        let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
        assert_eq!(values, vec![2.0, 3.0, 3.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn zero_overlap_gives_title_only_scores() {
        let scores = score_rows(&breakfast(), "Zebras gallop quickly.", &HashMap::new());
        assert!(scores.iter().all(|s| s.score == 0.0));
        let scores = score_rows(&breakfast(), "America zebras.", &HashMap::new());
        assert!(scores.iter().all(|s| s.score == 1.0));
    }

    #[test]
    fn drr_identity_and_dominance() {
        let t = breakfast();
        assert_eq!(drr(&t, "anything", 8, &HashMap::new()).unwrap(), t);
        let one = drr(&t, "The Producer was Peter Henderson, Supertramp", 1, &HashMap::new()).unwrap();
        assert_eq!(one.rows, vec![t.rows[6].clone()]);
        assert!(drr(&t, "x", 0, &HashMap::new()).is_err());
    }

    #[test]
    fn drr4_for_h1_keeps_table_order() {
        // H1 content stems: breakfast america pop album duration 50 minut.
        // Oracle (hand): Genre gets pop (+1) → 3.0; every other row 2.0.
        // Top 4 = Genre plus the three earliest ties: Released, Recorded, Studio.
        let t = breakfast();
        let h1 = "Breakfast in America is a pop album with a duration less than 50 minutes.";
        let kept = drr(&t, h1, 4, &HashMap::new()).unwrap();
        let keys: Vec<&str> = kept.rows.iter().map(|r| r.key.as_str()).collect();
        assert_eq!(keys, vec!["Released", "Recorded", "Studio", "Genre"]);
    }

    #[test]
    fn idf_weights_apply() {
        let mut idf = HashMap::new();
        idf.insert("recorded".to_string(), 3.0);
        let scores = score_rows(&breakfast(), "recorded", &idf);
        assert_eq!(scores[1].score, 3.0);
        assert_eq!(scores[0].score, 0.0);
    }
}

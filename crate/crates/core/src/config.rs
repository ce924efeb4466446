//! Run configuration loaded from a TOML file. Command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Table file or directory of table files.
    pub tables: Option<PathBuf>,
    pub hypotheses: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    /// Directory holding the gazetteer term lists.
    pub gazetteer: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub idf: Option<PathBuf>,
    pub paraphrase_map: Option<PathBuf>,
}

impl Paths {
    fn each_mut(&mut self) -> [&mut Option<PathBuf>; 7] {
        [
            &mut self.tables,
            &mut self.hypotheses,
            &mut self.templates,
            &mut self.gazetteer,
            &mut self.synonyms,
            &mut self.idf,
            &mut self.paraphrase_map,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    pub table_format: Option<String>,
    pub split: Option<String>,
    pub mode: Option<String>,
    pub drr: Option<usize>,
    pub strategy: Option<String>,
    pub ratio: Option<f64>,
    pub kinds: Option<Vec<String>>,
    pub n_ops: Option<usize>,
    pub negation_contradiction: Option<String>,
    pub paraphrase: Option<String>,
    pub embed_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub steps: Option<usize>,
    pub k: Option<Vec<usize>>,
}

impl RunConfig {
    /// Parse TOML text; relative paths resolve against `base`, and every
    /// referenced path must exist.
    pub fn from_toml(raw: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(raw).map_err(|e| match e.span() {
            Some(span) => ForgeError::parse_at(format!("config: {}", e.message()), span.start),
            None => ForgeError::parse(format!("config: {}", e.message())),
        })?;
        for slot in cfg.paths.each_mut() {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.exists() {
                    return Err(ForgeError::validation(format!("config path {} does not exist", p.display())));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = crate::io::read_string(path)?;
        RunConfig::from_toml(&raw, path.parent().unwrap_or(Path::new(".")))
    }
}

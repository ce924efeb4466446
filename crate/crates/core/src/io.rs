//! File helpers: JSONL streams and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{ForgeError, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| ForgeError::Io(format!("{}: {e}", path.display())))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ForgeError::Io(format!("{}: {e}", path.display())))
}

/// Write via a temp file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| ForgeError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse one JSON value per non-blank line. Offsets in errors are into `raw`.
pub fn from_jsonl<T: DeserializeOwned>(raw: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() {
            let item = serde_json::from_str(body).map_err(|e| {
                let col = crate::error::line_col_to_offset(body.as_bytes(), e.line(), e.column());
                ForgeError::parse_at(format!("line {}: {e}", raw[..offset].matches('\n').count() + 1), offset + col)
            })?;
            out.push(item);
        }
        offset += line.len();
    }
    Ok(out)
}

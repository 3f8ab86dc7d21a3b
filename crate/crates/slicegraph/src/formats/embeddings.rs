//! Slice embedding files: a `dim=<d>` header, then one
//! `<slice_id>\t<f1> <f2> ... <fd>` row per slice. Lines starting with `#`
//! (provenance notes) and blank lines are ignored anywhere in the file.

use std::path::Path;

use slicegraph_core::embed::EmbeddingTable;

use super::{numbered_lines, read_text};
use crate::error::{Error, ParseError, Result};

pub fn parse_embeddings(text: &str, path: &Path) -> Result<EmbeddingTable, ParseError> {
    let mut table: Option<EmbeddingTable> = None;
    for (n, line) in numbered_lines(text) {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ParseError::new(path, n, msg);
        let Some(t) = table.as_mut() else {
            let dim = line
                .strip_prefix("dim=")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .ok_or_else(|| err(format!("expected `dim=<d>` header, got {line:?}")))?;
            table = Some(EmbeddingTable::new(dim).map_err(|e| err(e.to_string()))?);
            continue;
        };
        let (id, values) = line.split_once('\t').ok_or_else(|| err("expected `<slice_id>\\t<values>`".into()))?;
        let id: u64 = id.trim().parse().map_err(|_| err(format!("bad slice id {id:?}")))?;
        let vector = values
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("row {id}: non-numeric value {v:?}"))))
            .collect::<Result<Vec<f64>, ParseError>>()?;
        t.insert(id, vector).map_err(|e| err(e.to_string()))?;
    }
    table.ok_or_else(|| ParseError::new(path, 1, "missing `dim=<d>` header"))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    Ok(parse_embeddings(&read_text(path)?, path)?)
}

/// Shortest decimal form of every value, which parses back bit-exactly.
pub fn write_embeddings(table: &EmbeddingTable) -> Result<String> {
    let mut out = format!("dim={}\n", table.dim());
    for (id, v) in table.iter() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::data(format!("row {id}: non-finite value")));
        }
        let values: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&format!("{id}\t{}\n", values.join(" ")));
    }
    Ok(out)
}

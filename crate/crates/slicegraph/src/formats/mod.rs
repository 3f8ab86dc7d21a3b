//! Plain-text file formats shared by the pipeline stages.

pub mod checkpoint;
pub mod embeddings;
pub mod gadgets;
pub mod graph_dump;
pub mod sinks;
pub mod tokens;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a half-written output.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Lines with their 1-based numbers and a trailing `\r` removed.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let lines = if text.is_empty() { None } else { Some(body.split('\n')) };
    lines.into_iter().flatten().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

/// Formats a float with 17 significant digits, enough to reproduce it
/// exactly when parsed back.
pub(crate) fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

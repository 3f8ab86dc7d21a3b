//! Tokenized corpus: one `<slice_id>\t<label>\t<token> <token> ...` line per
//! slice.

use std::path::Path;

use slicegraph_core::corpus::Label;
use slicegraph_core::normalize::TokenizedSlice;

use super::{numbered_lines, read_text};
use crate::error::{Error, ParseError, Result};

pub fn parse_tokens(text: &str, path: &Path) -> Result<Vec<TokenizedSlice>, ParseError> {
    let mut out: Vec<TokenizedSlice> = Vec::new();
    for (n, line) in numbered_lines(text) {
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ParseError::new(path, n, msg);
        let mut fields = line.splitn(3, '\t');
        let (Some(id), Some(label), Some(tokens)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err("expected `<slice_id>\\t<label>\\t<tokens>`".into()));
        };
        let slice_id: u64 = id.parse().map_err(|_| err(format!("bad slice id {id:?}")))?;
        let label = match label {
            "0" => Label::Safe,
            "1" => Label::Vulnerable,
            other => return Err(err(format!("label not in {{0,1}}: {other}"))),
        };
        if out.iter().any(|t| t.slice_id == slice_id) {
            return Err(err(format!("duplicate slice id {slice_id}")));
        }
        let tokens = tokens.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
        out.push(TokenizedSlice { slice_id, label, tokens });
    }
    Ok(out)
}

pub fn read_tokens(path: &Path) -> Result<Vec<TokenizedSlice>> {
    Ok(parse_tokens(&read_text(path)?, path)?)
}

pub fn write_tokens(slices: &[TokenizedSlice]) -> Result<String> {
    let mut out = String::new();
    for s in slices {
        if let Some(bad) = s.tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(Error::data(format!("slice {}: token {bad:?} is empty or contains whitespace", s.slice_id)));
        }
        out.push_str(&format!("{}\t{}\t{}\n", s.slice_id, s.label.as_u8(), s.tokens.join(" ")));
    }
    Ok(out)
}

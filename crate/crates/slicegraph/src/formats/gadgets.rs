//! Gadget corpus files: repeated blocks of
//!
//! ```text
//! <id> <origin...>
//! <code line>          (one or more)
//! <0|1>
//! ---------------------------------
//! ```

use std::path::Path;

use slicegraph_core::corpus::{Corpus, Kind, Label, SliceRecord, BLOCK_SEPARATOR};

use super::{numbered_lines, read_text};
use crate::error::{Error, ParseError, Result};

/// Parses a whole corpus file. Every record gets `kind`, which the file
/// format does not carry.
pub fn parse_gadgets(text: &str, path: &Path, kind: Kind) -> Result<Corpus, ParseError> {
    let err = |line: usize, msg: String| ParseError::new(path, line, msg);
    let mut records: Vec<SliceRecord> = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (n, line) in numbered_lines(text) {
        if line != BLOCK_SEPARATOR {
            block.push((n, line));
            continue;
        }
        let Some(&(header_line, header)) = block.first() else {
            return Err(err(n, "separator without a block".into()));
        };
        if block.len() < 3 {
            let what = if block.len() == 1 { "missing label and code" } else { "empty code body" };
            return Err(err(header_line, format!("block has {what}")));
        }
        let (id_text, origin) = header.split_once(' ').unwrap_or((header, ""));
        let id: u64 = id_text
            .parse()
            .map_err(|_| err(header_line, format!("malformed header: expected `<id> <origin>`, got {header:?}")))?;
        let &(label_line, label_text) = block.last().expect("block has at least 3 lines");
        let label = match label_text.trim() {
            "0" => Label::Safe,
            "1" => Label::Vulnerable,
            other => return Err(err(label_line, format!("label not in {{0,1}}: {other}"))),
        };
        if let Some(prev) = records.last() {
            if id <= prev.id {
                return Err(err(header_line, format!("slice id {id} does not increase (previous {})", prev.id)));
            }
        }
        let code: Vec<String> = block[1..block.len() - 1].iter().map(|&(_, l)| l.to_string()).collect();
        let record =
            SliceRecord::new(id, origin, code, label, kind).map_err(|e| err(header_line, e.to_string()))?;
        records.push(record);
        block.clear();
    }
    if let Some(&(n, _)) = block.iter().find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(n, "missing separator at end of file".into()));
    }
    Corpus::new(records).map_err(|e| err(1, e.to_string()))
}

pub fn read_gadget_file(path: &Path, kind: Kind) -> Result<Corpus> {
    Ok(parse_gadgets(&read_text(path)?, path, kind)?)
}

/// Renders records in file order.
pub fn write_gadgets(records: &[SliceRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        r.validate().map_err(Error::data)?;
        if r.origin.is_empty() {
            out.push_str(&format!("{}\n", r.id));
        } else {
            out.push_str(&format!("{} {}\n", r.id, r.origin));
        }
        for line in &r.code_lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("{}\n{BLOCK_SEPARATOR}\n", r.label.as_u8()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Corpus, ParseError> {
        parse_gadgets(text, Path::new("c.txt"), Kind::Gadget)
    }

    const SEP: &str = "---------------------------------";

    #[test]
    fn single_block() {
        let c = parse(&format!("0 a.c main 10\nstrcpy(buf,src);\n1\n{SEP}\n")).unwrap();
        assert_eq!(c.len(), 1);
        let r = &c.records()[0];
        assert_eq!((r.id, r.origin.as_str(), r.label), (0, "a.c main 10", Label::Vulnerable));
        assert_eq!(r.code_lines, vec!["strcpy(buf,src);"]);
        assert!(!c.is_split());
    }

    #[test]
    fn two_blocks() {
        let block = |id| format!("{id} a.c main 10\nstrcpy(buf,src);\n1\n{SEP}\n");
        let c = parse(&(block(0) + &block(1))).unwrap();
        assert_eq!(c.records().iter().map(|r| r.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse(&format!("0 a.c\nx;\n2\n{SEP}\n")).unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (3, "label not in {0,1}: 2"));
        let e = parse(&format!("0 a.c\n1\n{SEP}\n")).unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (1, "block has empty code body"));
        let e = parse("0 a.c\nx;\n1\n").unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (1, "missing separator at end of file"));
        let e = parse(&format!("zero a.c\nx;\n1\n{SEP}\n")).unwrap_err();
        assert!(e.message.starts_with("malformed header"));
        let e = parse(&format!("3\nx;\n1\n{SEP}\n3\ny;\n0\n{SEP}\n")).unwrap_err();
        assert_eq!(e.line, 5);
        assert_eq!(e.to_string(), "c.txt:5: slice id 3 does not increase (previous 3)");
    }

    #[test]
    fn crlf_and_code_lines_that_look_like_labels() {
        let c = parse(&format!("4 o\r\n0\r\n1\r\n1\r\n{SEP}\r\n")).unwrap();
        assert_eq!(c.records()[0].code_lines, vec!["0", "1"]);
        assert_eq!(c.records()[0].label, Label::Vulnerable);
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        assert!(parse("").unwrap().is_empty());
    }

    fn arb_record() -> impl Strategy<Value = (String, Vec<String>, bool)> {
        (
            "[ -~]{0,20}",
            proptest::collection::vec("[ -~]{0,30}".prop_filter("not a separator", |l| l != SEP), 1..5),
            any::<bool>(),
        )
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(raw in proptest::collection::vec(arb_record(), 0..6), start in 0u64..100) {
            let records: Vec<SliceRecord> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (origin, code, vuln))| {
                    let label = if vuln { Label::Vulnerable } else { Label::Safe };
                    SliceRecord::new(start + 2 * i as u64, origin, code, label, Kind::Au).unwrap()
                })
                .collect();
            let text = write_gadgets(&records).unwrap();
            let parsed = parse_gadgets(&text, Path::new("p"), Kind::Au).unwrap();
            prop_assert_eq!(parsed.records(), &records[..]);
        }
    }
}

//! Symbolic representation of slices: comment and non-ASCII removal,
//! one-to-one renaming of user variables to `V1, V2, ...` and user functions
//! to `F1, F2, ...`, then lexical tokenization.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::corpus::{Label, SliceRecord};
use crate::lexer::{self, LexError, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("line {line}: unterminated block comment")]
    UnterminatedComment { line: u32 },
    #[error("slice {id}: {source}")]
    Lex { id: u64, source: LexError },
}

/// Removes `//` and `/* */` comments and every byte ≥ 0x80. Newlines inside
/// block comments are kept so line numbers do not shift. String and
/// character literals are left alone apart from the non-ASCII filter.
pub fn strip_comments_nonascii(text: &str) -> Result<String, NormalizeError> {
    #[derive(PartialEq)]
    enum State {
        Code,
        Literal(u8),
        Line,
        Block { opened_on: u32 },
    }

    let bytes = text.as_bytes();
    let mut out: Vec<u8> = Vec::with_capacity(bytes.len());
    let mut state = State::Code;
    let mut line = 1u32;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        if b == b'\n' {
            line += 1;
        }
        if b >= 0x80 {
            i += 1;
            continue;
        }
        match state {
            State::Code => match (b, next) {
                (b'/', Some(b'/')) => {
                    state = State::Line;
                    i += 2;
                    continue;
                }
                (b'/', Some(b'*')) => {
                    state = State::Block { opened_on: line };
                    i += 2;
                    continue;
                }
                (b'"' | b'\'', _) => {
                    state = State::Literal(b);
                    out.push(b);
                }
                _ => out.push(b),
            },
            State::Literal(quote) => {
                out.push(b);
                if b == b'\\' {
                    if let Some(n) = next {
                        if n < 0x80 {
                            out.push(n);
                        }
                        if n == b'\n' {
                            line += 1;
                        }
                        i += 2;
                        continue;
                    }
                } else if b == quote || b == b'\n' {
                    state = State::Code;
                }
            }
            State::Line => {
                if b == b'\\' && next == Some(b'\n') {
                    out.push(b'\n');
                    line += 1;
                    i += 2;
                    continue;
                }
                if b == b'\n' {
                    out.push(b'\n');
                    state = State::Code;
                }
            }
            State::Block { .. } => {
                if b == b'*' && next == Some(b'/') {
                    state = State::Code;
                    i += 2;
                    continue;
                }
                if b == b'\n' {
                    out.push(b'\n');
                }
            }
        }
        i += 1;
    }
    if let State::Block { opened_on } = state {
        return Err(NormalizeError::UnterminatedComment { line: opened_on });
    }
    Ok(String::from_utf8(out).expect("output holds ASCII bytes only"))
}

/// Words that are never renamed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

const CPP_KEYWORDS: &[&str] = &[
    "bool", "true", "false", "class", "new", "delete", "this", "namespace", "template", "typename",
    "public", "private", "protected", "virtual", "operator", "nullptr", "try", "catch", "throw",
    "using", "const_cast", "static_cast", "dynamic_cast", "reinterpret_cast", "friend", "mutable",
    "explicit", "wchar_t",
];

const MACRO_CONSTANTS: &[&str] = &["NULL", "EOF", "stdin", "stdout", "stderr", "errno", "BUFSIZ"];

impl Stoplist {
    pub fn empty() -> Self {
        Self { words: BTreeSet::new() }
    }

    pub fn insert(&mut self, word: impl Into<String>) {
        self.words.insert(word.into());
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

impl Default for Stoplist {
    /// C11 keywords, common C++ keywords, common typedef names and standard
    /// macro constants.
    fn default() -> Self {
        let mut s = Self::empty();
        let lists: [&[&str]; 4] = [lexer::C11_KEYWORDS, CPP_KEYWORDS, crate::slicer::COMMON_TYPEDEFS, MACRO_CONSTANTS];
        for w in lists.into_iter().flatten() {
            s.insert(*w);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolizeOptions {
    pub stoplist: Stoplist,
    /// Rename member names after `.` and `->` like variables.
    pub symbolize_fields: bool,
}

impl Default for SymbolizeOptions {
    fn default() -> Self {
        Self { stoplist: Stoplist::default(), symbolize_fields: true }
    }
}

/// Renaming applied to one slice. Symbols are numbered from 1 in order of
/// first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolMap {
    pub var_map: BTreeMap<String, String>,
    pub func_map: BTreeMap<String, String>,
}

impl SymbolMap {
    fn var(&mut self, name: &str) -> String {
        let next = self.var_map.len() + 1;
        self.var_map.entry(name.to_string()).or_insert_with(|| format!("V{next}")).clone()
    }

    fn func(&mut self, name: &str) -> String {
        let next = self.func_map.len() + 1;
        self.func_map.entry(name.to_string()).or_insert_with(|| format!("F{next}")).clone()
    }
}

/// Rewrites each code line as space-separated tokens with user identifiers
/// replaced by their symbols. Library callees, keywords, stoplisted words and
/// literals pass through unchanged.
pub fn symbolize_lines(
    lines: &[String],
    user_funcs: &BTreeSet<String>,
    opts: &SymbolizeOptions,
) -> Result<(Vec<String>, SymbolMap), LexError> {
    let mut map = SymbolMap::default();
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let tokens = lexer::lex_c_source(line)?;
        let mut rendered: Vec<String> = Vec::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            let text = if t.kind != TokenKind::Identifier {
                t.text.clone()
            } else if tokens.get(i + 1).is_some_and(|n| n.is("(")) {
                if user_funcs.contains(&t.text) {
                    map.func(&t.text)
                } else {
                    t.text.clone()
                }
            } else if opts.stoplist.contains(&t.text) {
                t.text.clone()
            } else if !opts.symbolize_fields && i > 0 && (tokens[i - 1].is(".") || tokens[i - 1].is("->")) {
                t.text.clone()
            } else {
                map.var(&t.text)
            };
            rendered.push(text);
        }
        out.push(rendered.join(" "));
    }
    Ok((out, map))
}

/// [`symbolize_lines`] over a record's code.
pub fn symbolize(
    slice: &SliceRecord,
    user_funcs: &BTreeSet<String>,
    opts: &SymbolizeOptions,
) -> Result<(Vec<String>, SymbolMap), NormalizeError> {
    symbolize_lines(&slice.code_lines, user_funcs, opts).map_err(|source| NormalizeError::Lex { id: slice.id, source })
}

/// Token sequence of one slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSlice {
    pub slice_id: u64,
    pub label: Label,
    pub tokens: Vec<String>,
}

/// Lexes symbolic lines into one flat token list. Whitespace inside string
/// and character literals is rewritten as octal escapes (`\040`, `\011`) so
/// no token contains whitespace; the literal's value is unchanged.
pub fn tokenize_symbolic(slice_id: u64, label: Label, lines: &[String]) -> Result<TokenizedSlice, NormalizeError> {
    let mut tokens = Vec::new();
    for line in lines {
        let lexed = lexer::lex_c_source(line).map_err(|source| NormalizeError::Lex { id: slice_id, source })?;
        tokens.extend(lexed.into_iter().map(|t| match t.kind {
            TokenKind::StringLit | TokenKind::CharLit => escape_literal_whitespace(&t.text),
            _ => t.text,
        }));
    }
    Ok(TokenizedSlice { slice_id, label, tokens })
}

fn escape_literal_whitespace(literal: &str) -> String {
    let mut out = String::with_capacity(literal.len());
    for c in literal.chars() {
        match c {
            ' ' => out.push_str("\\040"),
            '\t' => out.push_str("\\011"),
            '\r' => out.push_str("\\015"),
            '\x0b' => out.push_str("\\013"),
            '\x0c' => out.push_str("\\014"),
            c => out.push(c),
        }
    }
    out
}

/// Full per-record normalization: strip, symbolize, tokenize.
pub fn normalize_record(
    record: &SliceRecord,
    user_funcs: &BTreeSet<String>,
    opts: &SymbolizeOptions,
) -> Result<TokenizedSlice, NormalizeError> {
    let joined = record.code_lines.join("\n");
    let cleaned = strip_comments_nonascii(&joined)?;
    let lines: Vec<String> = cleaned.split('\n').map(String::from).collect();
    let (symbolic, _) =
        symbolize_lines(&lines, user_funcs, opts).map_err(|source| NormalizeError::Lex { id: record.id, source })?;
    tokenize_symbolic(record.id, record.label, &symbolic)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DedupSummary {
    pub removed: usize,
    /// Removed duplicates whose label differed from the kept copy.
    pub label_conflicts: usize,
}

/// Drops slices whose token sequence repeats an earlier slice's; the first
/// occurrence is kept.
pub fn dedup_tokenized(slices: Vec<TokenizedSlice>) -> (Vec<TokenizedSlice>, DedupSummary) {
    let mut first_label: BTreeMap<Vec<String>, Label> = BTreeMap::new();
    let mut summary = DedupSummary::default();
    let mut kept = Vec::with_capacity(slices.len());
    for s in slices {
        match first_label.get(&s.tokens) {
            Some(&label) => {
                summary.removed += 1;
                if label != s.label {
                    summary.label_conflicts += 1;
                }
            }
            None => {
                first_label.insert(s.tokens.clone(), s.label);
                kept.push(s);
            }
        }
    }
    (kept, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Kind;
    use alloc::vec;
    use proptest::prelude::*;

    fn lines(src: &[&str]) -> Vec<String> {
        src.iter().map(|s| s.to_string()).collect()
    }

    fn no_funcs() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn strips_comments() {
        assert_eq!(strip_comments_nonascii("x=1; // set").unwrap(), "x=1; ");
        assert_eq!(strip_comments_nonascii("a/*b*/c").unwrap(), "ac");
        assert_eq!(strip_comments_nonascii("a/*\n\n*/b").unwrap(), "a\n\nb");
        assert_eq!(strip_comments_nonascii("s = \"// not /* a comment\";").unwrap(), "s = \"// not /* a comment\";");
        assert_eq!(strip_comments_nonascii("c = '/'; // x\ny").unwrap(), "c = '/'; \ny");
    }

    #[test]
    fn strips_non_ascii_bytes() {
        // é is 0xC3 0xA9: both bytes go.
        assert_eq!(strip_comments_nonascii("s=\"héllo\";").unwrap(), "s=\"hllo\";");
    }

    #[test]
    fn unterminated_block_comment() {
        assert_eq!(strip_comments_nonascii("a;\n/* open"), Err(NormalizeError::UnterminatedComment { line: 2 }));
    }

    #[test]
    fn symbolizes_worked_example() {
        let (out, map) = symbolize_lines(&lines(&["data = buf - 8;"]), &no_funcs(), &SymbolizeOptions::default()).unwrap();
        assert_eq!(out, vec!["V1 = V2 - 8 ;"]);
        assert_eq!(out[0].replace(' ', ""), "V1=V2-8;");
        assert_eq!(map.var_map["data"], "V1");
        assert_eq!(map.var_map["buf"], "V2");
    }

    #[test]
    fn library_callees_stay_and_user_functions_become_f() {
        let opts = SymbolizeOptions::default();
        let (out, _) = symbolize_lines(&lines(&["strcpy(dst,src);"]), &no_funcs(), &opts).unwrap();
        assert_eq!(out, vec!["strcpy ( V1 , V2 ) ;"]);

        let funcs: BTreeSet<String> = ["helper".to_string()].into();
        let (out, map) = symbolize_lines(&lines(&["helper(x);", "n = helper(y) + sizeof(int);"]), &funcs, &opts).unwrap();
        assert_eq!(out, vec!["F1 ( V1 ) ;", "V2 = F1 ( V3 ) + sizeof ( int ) ;"]);
        assert_eq!(map.func_map.len(), 1);
    }

    #[test]
    fn stoplisted_names_pass_through() {
        let (out, _) =
            symbolize_lines(&lines(&["size_t n = NULL;"]), &no_funcs(), &SymbolizeOptions::default()).unwrap();
        assert_eq!(out, vec!["size_t V1 = NULL ;"]);
    }

    #[test]
    fn field_names_are_configurable() {
        let mut opts = SymbolizeOptions::default();
        let (out, _) = symbolize_lines(&lines(&["p->len = n;"]), &no_funcs(), &opts).unwrap();
        assert_eq!(out, vec!["V1 -> V2 = V3 ;"]);
        opts.symbolize_fields = false;
        let (out, _) = symbolize_lines(&lines(&["p->len = n;"]), &no_funcs(), &opts).unwrap();
        assert_eq!(out, vec!["V1 -> len = V2 ;"]);
    }

    #[test]
    fn tokenizes_worked_example() {
        let t = tokenize_symbolic(0, Label::Safe, &lines(&["V1=V2-8;"])).unwrap();
        assert_eq!(t.tokens, vec!["V1", "=", "V2", "-", "8", ";"]);
        assert!(tokenize_symbolic(0, Label::Safe, &lines(&[""])).unwrap().tokens.is_empty());
        let t = tokenize_symbolic(0, Label::Safe, &lines(&["F1(V1);"])).unwrap();
        assert_eq!(t.tokens, vec!["F1", "(", "V1", ")", ";"]);
    }

    #[test]
    fn literal_whitespace_is_escaped() {
        let t = tokenize_symbolic(0, Label::Safe, &lines(&["printf(\"a b\\t\", '\t');"])).unwrap();
        assert_eq!(t.tokens[2], "\"a\\040b\\t\"");
        assert_eq!(t.tokens[4], "'\\011'");
        assert!(t.tokens.iter().all(|tok| !tok.contains(char::is_whitespace)));
    }

    #[test]
    fn normalizes_a_record_with_comments() {
        let rec = SliceRecord::new(
            4,
            "x.c f 1",
            lines(&["char buf[10]; /* fixed", " size */ strcpy(buf, src); // copy"]),
            Label::Vulnerable,
            Kind::Fc,
        )
        .unwrap();
        let t = normalize_record(&rec, &no_funcs(), &SymbolizeOptions::default()).unwrap();
        assert_eq!(t.slice_id, 4);
        assert_eq!(t.label, Label::Vulnerable);
        assert_eq!(t.tokens.join(" "), "char V1 [ 10 ] ; strcpy ( V1 , V2 ) ;");
    }

    #[test]
    fn dedup_counts_conflicts() {
        let mk = |id, label, toks: &str| TokenizedSlice {
            slice_id: id,
            label,
            tokens: toks.split(' ').map(String::from).collect(),
        };
        let (kept, summary) = dedup_tokenized(vec![
            mk(0, Label::Safe, "a b"),
            mk(1, Label::Vulnerable, "a b"),
            mk(2, Label::Safe, "a b"),
            mk(3, Label::Safe, "c"),
        ]);
        assert_eq!(kept.iter().map(|s| s.slice_id).collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(summary, DedupSummary { removed: 2, label_conflicts: 1 });
    }

    const TEMPLATES: &[&str] = &[
        "{a} = {b} - 8;",
        "strcpy({a}, {b});",
        "if ({c} > {a}) {b}++;",
        "{c} = malloc({a} * sizeof(char));",
        "memcpy({b}, {c}, {a});",
        "{a}->{c} = {b}[{c}];",
    ];

    fn render(template: &str, names: &[String; 3]) -> String {
        template.replace("{a}", &names[0]).replace("{b}", &names[1]).replace("{c}", &names[2])
    }

    proptest! {
        #[test]
        fn renaming_invariance(
            picks in proptest::collection::vec(0..TEMPLATES.len(), 1..6),
            left in proptest::collection::btree_set("[a-z][a-z0-9_]{1,5}x", 3),
            right in proptest::collection::btree_set("[a-z][a-z0-9_]{1,5}y", 3),
        ) {
            let left: Vec<String> = left.into_iter().collect();
            let right: Vec<String> = right.into_iter().collect();
            let l = [left[0].clone(), left[1].clone(), left[2].clone()];
            let r = [right[0].clone(), right[1].clone(), right[2].clone()];
            let a: Vec<String> = picks.iter().map(|&p| render(TEMPLATES[p], &l)).collect();
            let b: Vec<String> = picks.iter().map(|&p| render(TEMPLATES[p], &r)).collect();
            let opts = SymbolizeOptions::default();
            let (sa, _) = symbolize_lines(&a, &no_funcs(), &opts).unwrap();
            let (sb, _) = symbolize_lines(&b, &no_funcs(), &opts).unwrap();
            prop_assert_eq!(&sa, &sb);
            let (again, _) = symbolize_lines(&sa, &no_funcs(), &opts).unwrap();
            prop_assert_eq!(&again, &sa);
            let toks = tokenize_symbolic(0, Label::Safe, &sa).unwrap();
            let lexed: usize = sa.iter().map(|l| lexer::lex_c_source(l).unwrap().len()).sum();
            prop_assert_eq!(toks.tokens.len(), lexed);
        }
    }
}

//! Maximal-munch lexer for comment-free C/C++ source.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLit,
    CharLit,
    Operator,
    Punctuation,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Keyword => "keyword",
            TokenKind::Number => "number",
            TokenKind::StringLit => "string",
            TokenKind::CharLit => "char",
            TokenKind::Operator => "operator",
            TokenKind::Punctuation => "punctuation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CToken {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line.
    pub line: u32,
    /// 1-based byte column.
    pub col: u32,
    /// Byte offset of the first character in the lexed text.
    pub offset: usize,
}

impl CToken {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_identifier(&self) -> bool {
        self.kind == TokenKind::Identifier
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: u32 },
    #[error("line {line}: unterminated character literal")]
    UnterminatedChar { line: u32 },
    #[error("line {line}, column {col}: unexpected byte 0x{byte:02x}")]
    UnexpectedByte { byte: u8, line: u32, col: u32 },
}

impl LexError {
    pub fn line(&self) -> u32 {
        match *self {
            LexError::UnterminatedString { line }
            | LexError::UnterminatedChar { line }
            | LexError::UnexpectedByte { line, .. } => line,
        }
    }
}

pub const C11_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
    "extern", "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return",
    "short", "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while", "_Alignas", "_Alignof", "_Atomic", "_Bool", "_Complex", "_Generic",
    "_Imaginary", "_Noreturn", "_Static_assert", "_Thread_local",
];

pub fn is_c11_keyword(word: &str) -> bool {
    C11_KEYWORDS.contains(&word)
}

// Longest first within each length class; `::` is accepted for C++ sources.
const PUNCTUATORS_3: &[&str] = &["<<=", ">>=", "..."];
const PUNCTUATORS_2: &[&str] = &[
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=", "/=", "%=", "+=", "-=",
    "&=", "^=", "|=", "##", "::",
];
const PUNCTUATORS_1: &[u8] = b"[](){}.&*+-~!/%<>^|?:;=,#";

fn punctuator_kind(text: &str) -> TokenKind {
    match text {
        "(" | ")" | "[" | "]" | "{" | "}" | ";" | "," | "..." | "#" | "##" => TokenKind::Punctuation,
        _ => TokenKind::Operator,
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

impl Cursor<'_> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn col(&self) -> u32 {
        (self.pos - self.line_start + 1) as u32
    }

    fn newline(&mut self) {
        self.line += 1;
        self.line_start = self.pos;
    }
}

/// Splits comment-free text into C tokens. Whitespace and backslash-newline
/// continuations are dropped; any byte outside the C source character set is
/// rejected.
pub fn lex_c_source(text: &str) -> Result<Vec<CToken>, LexError> {
    let mut cur = Cursor { bytes: text.as_bytes(), pos: 0, line: 1, line_start: 0 };
    let mut tokens = Vec::new();

    while let Some(b) = cur.peek(0) {
        match b {
            b'\n' => {
                cur.pos += 1;
                cur.newline();
                continue;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => {
                cur.pos += 1;
                continue;
            }
            b'\\' if cur.peek(1) == Some(b'\n') => {
                cur.pos += 2;
                cur.newline();
                continue;
            }
            b'\\' if cur.peek(1) == Some(b'\r') && cur.peek(2) == Some(b'\n') => {
                cur.pos += 3;
                cur.newline();
                continue;
            }
            _ => {}
        }

        let start = cur.pos;
        let line = cur.line;
        let col = cur.col();

        let kind = if let Some(quote_at) = literal_prefix(&cur) {
            cur.pos += quote_at;
            lex_quoted(&mut cur, line)?
        } else if is_ident_start(b) {
            while cur.peek(0).is_some_and(is_ident_continue) {
                cur.pos += 1;
            }
            if is_c11_keyword(&text[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if b.is_ascii_digit() || (b == b'.' && cur.peek(1).is_some_and(|c| c.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Number
        } else if let Some(len) = punctuator_len(&cur.bytes[cur.pos..]) {
            cur.pos += len;
            punctuator_kind(&text[start..cur.pos])
        } else {
            return Err(LexError::UnexpectedByte { byte: b, line, col });
        };

        tokens.push(CToken { kind, text: text[start..cur.pos].into(), line, col, offset: start });
    }
    Ok(tokens)
}

/// Offset of the opening quote if a string or character literal starts here,
/// including the `L`, `u`, `U` and `u8` encoding prefixes.
fn literal_prefix(cur: &Cursor<'_>) -> Option<usize> {
    let quote = |c: Option<u8>| matches!(c, Some(b'"') | Some(b'\''));
    match cur.peek(0)? {
        b'"' | b'\'' => Some(0),
        b'L' | b'U' if quote(cur.peek(1)) => Some(1),
        b'u' if quote(cur.peek(1)) => Some(1),
        b'u' if cur.peek(1) == Some(b'8') && cur.peek(2) == Some(b'"') => Some(2),
        _ => None,
    }
}

fn lex_quoted(cur: &mut Cursor<'_>, line: u32) -> Result<TokenKind, LexError> {
    let quote = cur.peek(0).expect("caller checked the quote");
    let (kind, err) = if quote == b'"' {
        (TokenKind::StringLit, LexError::UnterminatedString { line })
    } else {
        (TokenKind::CharLit, LexError::UnterminatedChar { line })
    };
    cur.pos += 1;
    loop {
        match cur.peek(0) {
            None | Some(b'\n') => return Err(err),
            Some(b'\\') => {
                if cur.peek(1).is_none() {
                    return Err(err);
                }
                if cur.peek(1) == Some(b'\n') {
                    cur.pos += 2;
                    cur.newline();
                } else {
                    cur.pos += 2;
                }
            }
            Some(c) if c == quote => {
                cur.pos += 1;
                return Ok(kind);
            }
            Some(_) => cur.pos += 1,
        }
    }
}

/// Preprocessing-number rule: digits, letters, `_`, `.`, and a sign directly
/// after an exponent letter.
fn lex_number(cur: &mut Cursor<'_>) {
    cur.pos += 1;
    while let Some(c) = cur.peek(0) {
        if matches!(c, b'+' | b'-') && matches!(cur.bytes[cur.pos - 1], b'e' | b'E' | b'p' | b'P') {
            cur.pos += 1;
        } else if is_ident_continue(c) || c == b'.' {
            cur.pos += 1;
        } else {
            break;
        }
    }
}

fn punctuator_len(rest: &[u8]) -> Option<usize> {
    let starts = |p: &str| rest.starts_with(p.as_bytes());
    if PUNCTUATORS_3.iter().any(|p| starts(p)) {
        Some(3)
    } else if PUNCTUATORS_2.iter().any(|p| starts(p)) {
        Some(2)
    } else if PUNCTUATORS_1.contains(&rest[0]) {
        Some(1)
    } else {
        None
    }
}

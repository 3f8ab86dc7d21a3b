//! Function spans, sensitive library/API calls, and intra-procedural
//! forward/backward def-use slicing into code gadgets.
//!
//! Def-use facts are syntactic: the base object of an assignment target, a
//! declarator, or an `++`/`--` operand is a definition; every other variable
//! occurrence is a use. There is no alias analysis, and a reassignment does
//! not stop tracking.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::lexer::{CToken, LexError, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("seed statement {seed} is outside function `{function}` ({len} statements)")]
    SeedOutsideFunction { function: String, seed: usize, len: usize },
    #[error("no statement of function `{function}` starts on line {line}")]
    NoStatementAtLine { function: String, line: u32 },
    #[error("cannot assemble a gadget from an empty set of statements")]
    EmptyGadget,
    #[error(transparent)]
    Lex(#[from] LexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// The call takes input from outside the program (network, files, argv).
    Forward,
    /// The call only consumes values computed by the program.
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            other => Err(alloc::format!("expected forward or backward, got {other:?}")),
        }
    }
}

/// Callee name → slicing direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkConfig {
    entries: BTreeMap<String, Direction>,
}

impl SinkConfig {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, callee: impl Into<String>, direction: Direction) {
        self.entries.insert(callee.into(), direction);
    }

    pub fn direction(&self, callee: &str) -> Option<Direction> {
        self.entries.get(callee).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Direction)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for SinkConfig {
    fn default() -> Self {
        let mut cfg = Self::empty();
        for name in ["strcpy", "strcat", "memcpy", "sprintf", "gets"] {
            cfg.insert(name, Direction::Backward);
        }
        for name in ["recv", "read", "fread", "scanf"] {
            cfg.insert(name, Direction::Forward);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkCall {
    pub callee: String,
    pub direction: Direction,
    /// Variables mentioned in the arguments, in order of first appearance.
    pub args: Vec<String>,
    pub line: u32,
    /// Index of the callee token in the scanned token list.
    pub token_index: usize,
}

/// One statement of a function body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub line: u32,
    pub col: u32,
    pub tokens: Vec<CToken>,
    /// Source text of the statement with whitespace runs collapsed.
    pub text: String,
}

impl Statement {
    fn from_tokens(tokens: Vec<CToken>, source: &str) -> Self {
        let first = tokens.first().expect("statements are non-empty");
        let last = tokens.last().expect("statements are non-empty");
        let raw = &source[first.offset..last.offset + last.text.len()];
        let text = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        Self { line: first.line, col: first.col, text, tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub name: String,
    pub params: Vec<String>,
    pub body_statements: Vec<Statement>,
    pub start_line: u32,
    pub end_line: u32,
}

impl FunctionSpan {
    /// Index of the first statement starting on `line`.
    pub fn statement_at_line(&self, line: u32) -> Result<usize, SliceError> {
        self.body_statements
            .iter()
            .position(|s| s.line == line)
            .ok_or_else(|| SliceError::NoStatementAtLine { function: self.name.clone(), line })
    }

    /// Index of the statement holding the token at `offset`.
    pub fn statement_containing(&self, offset: usize) -> Option<usize> {
        self.body_statements.iter().position(|s| s.tokens.iter().any(|t| t.offset == offset))
    }
}

fn matching(tokens: &[CToken], open_at: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open_at) {
        if t.is(open) {
            depth += 1;
        } else if t.is(close) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn matching_backward(tokens: &[CToken], close_at: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=close_at).rev() {
        if tokens[i].is(close) {
            depth += 1;
        } else if tokens[i].is(open) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

const TRAILING_QUALIFIERS: &[&str] = &["const", "noexcept", "override", "final", "volatile"];

/// Finds function definitions (`name ( params ) { body }`) outside other
/// function bodies. `source` must be the text `tokens` were lexed from.
pub fn find_functions(tokens: &[CToken], source: &str) -> Vec<FunctionSpan> {
    let mut functions = Vec::new();
    let mut i = 0;
    while i + 1 < tokens.len() {
        if !(tokens[i].is_identifier() && tokens[i + 1].is("(")) {
            i += 1;
            continue;
        }
        let Some(close) = matching(tokens, i + 1, "(", ")") else {
            break;
        };
        let mut k = close + 1;
        while k < tokens.len() && TRAILING_QUALIFIERS.contains(&tokens[k].text.as_str()) {
            k += 1;
        }
        if k < tokens.len() && tokens[k].is("{") {
            if let Some(end) = matching(tokens, k, "{", "}") {
                functions.push(FunctionSpan {
                    name: tokens[i].text.clone(),
                    params: parameter_names(&tokens[i + 2..close]),
                    body_statements: split_statements(&tokens[k + 1..end], source),
                    start_line: tokens[i].line,
                    end_line: tokens[end].line,
                });
                i = end + 1;
                continue;
            }
        }
        i = close + 1;
    }
    functions
}

fn parameter_names(params: &[CToken]) -> Vec<String> {
    let mut names = Vec::new();
    for chunk in split_top_level(params, ",") {
        let mut depth = 0i32;
        let mut last = None;
        let mut nested_first = None;
        for t in chunk {
            match t.text.as_str() {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                _ if t.is_identifier() => {
                    if depth == 0 {
                        last = Some(t);
                    } else if nested_first.is_none() {
                        nested_first = Some(t);
                    }
                }
                _ => {}
            }
        }
        // `int (*cb)(int)` names its parameter inside the first group.
        if let Some(t) = last.or(nested_first) {
            names.push(t.text.clone());
        }
    }
    names
}

fn split_top_level<'a>(tokens: &'a [CToken], sep: &str) -> Vec<&'a [CToken]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                parts.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < tokens.len() {
        parts.push(&tokens[start..]);
    }
    parts
}

/// Splits a body into statements: `;` outside parentheses ends a statement,
/// `{` ends a control header, `}` closes a block. Braces that follow `=` open
/// an initializer and stay inside the statement.
fn split_statements(body: &[CToken], source: &str) -> Vec<Statement> {
    let mut statements = Vec::new();
    let mut current: Vec<CToken> = Vec::new();
    let mut paren_depth = 0i32;
    let mut init_depth = 0i32;
    let flush = |current: &mut Vec<CToken>, statements: &mut Vec<Statement>| {
        if !current.is_empty() {
            statements.push(Statement::from_tokens(core::mem::take(current), source));
        }
    };
    for t in body {
        match t.text.as_str() {
            "(" => paren_depth += 1,
            ")" => paren_depth -= 1,
            _ => {}
        }
        if init_depth > 0 {
            if t.is("{") {
                init_depth += 1;
            } else if t.is("}") {
                init_depth -= 1;
            }
            current.push(t.clone());
            continue;
        }
        match t.text.as_str() {
            "{" if current.last().is_some_and(|p| p.is("=") || p.is(",")) || (paren_depth > 0) => {
                init_depth = 1;
                current.push(t.clone());
            }
            "{" | "}" => flush(&mut current, &mut statements),
            ";" if paren_depth == 0 => {
                current.push(t.clone());
                flush(&mut current, &mut statements);
            }
            _ => current.push(t.clone()),
        }
    }
    flush(&mut current, &mut statements);
    statements
}

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "<<=", ">>=", "&=", "^=", "|="];

/// Type names treated as declaration starters besides the C keywords.
pub const COMMON_TYPEDEFS: &[&str] = &[
    "size_t", "ssize_t", "FILE", "wchar_t", "bool", "off_t", "ptrdiff_t", "intptr_t", "uintptr_t",
    "time_t", "pid_t", "socklen_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t",
    "uint32_t", "uint64_t", "BYTE", "DWORD", "WORD", "BOOL", "string", "std",
];

const DECL_KEYWORDS: &[&str] = &[
    "char", "int", "short", "long", "float", "double", "void", "signed", "unsigned", "_Bool", "const",
    "volatile", "static", "extern", "register", "auto", "struct", "union", "enum", "inline",
    "restrict", "_Complex", "_Atomic", "_Thread_local",
];

/// Whether `tokens[i]` is an identifier naming a variable: not a callee,
/// not a member name, not a struct/union/enum tag.
fn is_variable_at(tokens: &[CToken], i: usize) -> bool {
    let t = &tokens[i];
    if !t.is_identifier() {
        return false;
    }
    if tokens.get(i + 1).is_some_and(|n| n.is("(")) {
        return false;
    }
    if i > 0 {
        let prev = &tokens[i - 1];
        if prev.is(".") || prev.is("->") || prev.is("struct") || prev.is("union") || prev.is("enum") {
            return false;
        }
    }
    true
}

/// Definition and use sets of one statement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefUse {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
}

impl DefUse {
    pub fn mentions(&self, var: &str) -> bool {
        self.defs.contains(var) || self.uses.contains(var)
    }
}

pub fn def_use(tokens: &[CToken]) -> DefUse {
    let mut def_at: BTreeSet<usize> = BTreeSet::new();

    for (p, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Operator {
            continue;
        }
        if ASSIGN_OPS.contains(&t.text.as_str()) && p > 0 {
            def_at.extend(lvalue_base(tokens, p - 1));
        } else if t.is("++") || t.is("--") {
            if tokens.get(p + 1).is_some_and(|n| n.is_identifier()) {
                def_at.insert(p + 1);
            } else if p > 0 {
                def_at.extend(lvalue_base(tokens, p - 1));
            }
        }
    }
    if starts_declaration(tokens) {
        for chunk_range in top_level_chunks(tokens) {
            let chunk = &tokens[chunk_range.clone()];
            let stop = chunk.iter().position(|t| t.is("=") || t.is("[") || t.is(";")).unwrap_or(chunk.len());
            let mut depth = 0i32;
            let mut declarator = None;
            for (k, t) in chunk[..stop].iter().enumerate() {
                match t.text.as_str() {
                    "(" => depth += 1,
                    ")" => depth -= 1,
                    _ if depth == 0 && is_variable_at(tokens, chunk_range.start + k) => {
                        declarator = Some(chunk_range.start + k)
                    }
                    _ => {}
                }
            }
            def_at.extend(declarator);
        }
    }

    let mut facts = DefUse::default();
    for i in 0..tokens.len() {
        if !is_variable_at(tokens, i) {
            continue;
        }
        if def_at.contains(&i) {
            facts.defs.insert(tokens[i].text.clone());
        } else {
            facts.uses.insert(tokens[i].text.clone());
        }
    }
    facts
}

fn starts_declaration(tokens: &[CToken]) -> bool {
    let Some(first) = tokens.first() else {
        return false;
    };
    if DECL_KEYWORDS.contains(&first.text.as_str()) || COMMON_TYPEDEFS.contains(&first.text.as_str()) {
        return true;
    }
    // `T x;`, `T *x = ...`, `T x[4];` with a user typedef `T`.
    if first.is_identifier() {
        let mut k = 1;
        while tokens.get(k).is_some_and(|t| t.is("*")) {
            k += 1;
        }
        if tokens.get(k).is_some_and(|t| t.is_identifier()) {
            return tokens
                .get(k + 1)
                .is_some_and(|t| matches!(t.text.as_str(), ";" | "=" | "," | "["));
        }
    }
    false
}

fn top_level_chunks(tokens: &[CToken]) -> Vec<core::ops::Range<usize>> {
    let mut chunks = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => {
                chunks.push(start..i);
                start = i + 1;
            }
            _ => {}
        }
    }
    chunks.push(start..tokens.len());
    chunks
}

/// Index of the base variable of the lvalue ending at `end`
/// (`a->b[i]` → `a`, `*p` → `p`, `(*q).x` → `q`).
fn lvalue_base(tokens: &[CToken], end: usize) -> Option<usize> {
    let mut j = end as isize;
    let mut candidate = None;
    while j >= 0 {
        let t = &tokens[j as usize];
        if t.is("]") {
            j = matching_backward(tokens, j as usize, "[", "]")? as isize - 1;
        } else if t.is_identifier() {
            candidate = Some(j as usize);
            if j >= 2 && (tokens[j as usize - 1].is(".") || tokens[j as usize - 1].is("->")) {
                j -= 2;
            } else {
                break;
            }
        } else if t.is(")") {
            let open = matching_backward(tokens, j as usize, "(", ")")?;
            let inner = (open + 1..j as usize).find(|&k| is_variable_at(tokens, k));
            return inner.or(candidate);
        } else {
            break;
        }
    }
    candidate
}

/// Every `name (` call whose callee is configured as a sink.
pub fn find_sink_calls(tokens: &[CToken], sinks: &SinkConfig) -> Vec<SinkCall> {
    let mut calls = Vec::new();
    for i in 0..tokens.len().saturating_sub(1) {
        let t = &tokens[i];
        if !t.is_identifier() || !tokens[i + 1].is("(") {
            continue;
        }
        if i > 0 && (tokens[i - 1].is(".") || tokens[i - 1].is("->")) {
            continue;
        }
        let Some(direction) = sinks.direction(&t.text) else {
            continue;
        };
        let close = matching(tokens, i + 1, "(", ")").unwrap_or(tokens.len());
        let mut args = Vec::new();
        for k in i + 2..close {
            if is_variable_at(tokens, k) && !args.contains(&tokens[k].text) {
                args.push(tokens[k].text.clone());
            }
        }
        calls.push(SinkCall { callee: t.text.clone(), direction, args, line: t.line, token_index: i });
    }
    calls
}

fn check_seed(f: &FunctionSpan, seed: usize) -> Result<(), SliceError> {
    if seed >= f.body_statements.len() {
        return Err(SliceError::SeedOutsideFunction {
            function: f.name.clone(),
            seed,
            len: f.body_statements.len(),
        });
    }
    Ok(())
}

/// Statements before `seed` that define a tracked variable, chased to a
/// fixed point: each included statement's uses become tracked too. The seed
/// statement is included; output keeps function order.
pub fn backward_slice(f: &FunctionSpan, seed_vars: &BTreeSet<String>, seed: usize) -> Result<Vec<Statement>, SliceError> {
    check_seed(f, seed)?;
    let facts: Vec<DefUse> = f.body_statements[..seed].iter().map(|s| def_use(&s.tokens)).collect();
    let mut tracked = seed_vars.clone();
    let mut included = alloc::vec![false; seed];
    loop {
        let mut changed = false;
        for i in (0..seed).rev() {
            if included[i] || facts[i].defs.is_disjoint(&tracked) {
                continue;
            }
            included[i] = true;
            changed = true;
            tracked.extend(facts[i].uses.iter().cloned());
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<Statement> =
        (0..seed).filter(|&i| included[i]).map(|i| f.body_statements[i].clone()).collect();
    out.push(f.body_statements[seed].clone());
    Ok(out)
}

/// Mirror of [`backward_slice`]: statements after `seed` mentioning a tracked
/// variable are included, and the variables they define become tracked.
pub fn forward_slice(f: &FunctionSpan, seed_vars: &BTreeSet<String>, seed: usize) -> Result<Vec<Statement>, SliceError> {
    check_seed(f, seed)?;
    let after = seed + 1..f.body_statements.len();
    let facts: Vec<DefUse> = f.body_statements[after.clone()].iter().map(|s| def_use(&s.tokens)).collect();
    let mut tracked = seed_vars.clone();
    let mut included = alloc::vec![false; facts.len()];
    loop {
        let mut changed = false;
        for (i, fact) in facts.iter().enumerate() {
            if included[i] || !tracked.iter().any(|v| fact.mentions(v)) {
                continue;
            }
            included[i] = true;
            changed = true;
            tracked.extend(fact.defs.iter().cloned());
        }
        if !changed {
            break;
        }
    }
    let mut out = alloc::vec![f.body_statements[seed].clone()];
    out.extend(after.zip(included).filter(|(_, inc)| *inc).map(|(i, _)| f.body_statements[i].clone()));
    Ok(out)
}

/// Union of slices with duplicate `(line, text)` statements removed, sorted
/// by source position.
pub fn assemble_gadget(slices: &[Vec<Statement>]) -> Result<Vec<Statement>, SliceError> {
    let mut seen: BTreeSet<(u32, &str)> = BTreeSet::new();
    let mut union: Vec<&Statement> = Vec::new();
    for stmt in slices.iter().flatten() {
        if seen.insert((stmt.line, stmt.text.as_str())) {
            union.push(stmt);
        }
    }
    if union.is_empty() {
        return Err(SliceError::EmptyGadget);
    }
    union.sort_by_key(|s| (s.line, s.col));
    Ok(union.into_iter().cloned().collect())
}

/// A gadget built around one sink call of one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedGadget {
    pub function: String,
    pub sink: SinkCall,
    pub statements: Vec<Statement>,
}

impl ExtractedGadget {
    pub fn code_lines(&self) -> Vec<String> {
        self.statements.iter().map(|s| s.text.clone()).collect()
    }
}

/// Result of slicing one translation unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedUnit {
    pub gadgets: Vec<ExtractedGadget>,
    /// Names of functions defined in the unit.
    pub user_functions: BTreeSet<String>,
}

/// Lexes already-cleaned source, then builds one gadget per sink call:
/// backward sinks take a backward slice over their argument variables,
/// forward sinks a forward slice over the arguments plus whatever the call
/// statement defines.
pub fn extract_gadgets(clean_source: &str, sinks: &SinkConfig) -> Result<ExtractedUnit, SliceError> {
    let tokens = crate::lexer::lex_c_source(clean_source)?;
    let functions = find_functions(&tokens, clean_source);
    let mut unit = ExtractedUnit {
        gadgets: Vec::new(),
        user_functions: functions.iter().map(|f| f.name.clone()).collect(),
    };
    for f in &functions {
        for (stmt_idx, stmt) in f.body_statements.iter().enumerate() {
            for call in find_sink_calls(&stmt.tokens, sinks) {
                let mut seeds: BTreeSet<String> = call.args.iter().cloned().collect();
                let slice = match call.direction {
                    Direction::Backward => backward_slice(f, &seeds, stmt_idx)?,
                    Direction::Forward => {
                        seeds.extend(def_use(&stmt.tokens).defs);
                        forward_slice(f, &seeds, stmt_idx)?
                    }
                };
                let statements = assemble_gadget(&[slice])?;
                unit.gadgets.push(ExtractedGadget { function: f.name.clone(), sink: call, statements });
            }
        }
    }
    Ok(unit)
}

/// Builds a single-function span from a body given as text, one statement
/// list per call. Handy for slicing snippets that are not full definitions.
pub fn function_from_body(name: &str, body: &str) -> Result<FunctionSpan, SliceError> {
    let tokens = crate::lexer::lex_c_source(body)?;
    Ok(FunctionSpan {
        name: name.to_string(),
        params: Vec::new(),
        body_statements: split_statements(&tokens, body),
        start_line: tokens.first().map_or(1, |t| t.line),
        end_line: tokens.last().map_or(1, |t| t.line),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn vars(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn texts(stmts: &[Statement]) -> Vec<&str> {
        stmts.iter().map(|s| s.text.as_str()).collect()
    }

    fn lex(src: &str) -> Vec<CToken> {
        crate::lexer::lex_c_source(src).unwrap()
    }

    #[test]
    fn finds_functions_and_params() {
        let src = "static int helper(char *dst, const char *src, size_t n) { return 0; }\n\
                   struct s { int a; };\n\
                   int main(void) {\n  int x = 1;\n  if (x) {\n    x++;\n  }\n}\n";
        let fns = find_functions(&lex(src), src);
        assert_eq!(fns.len(), 2);
        assert_eq!(fns[0].name, "helper");
        assert_eq!(fns[0].params, vec!["dst", "src", "n"]);
        assert_eq!(fns[1].name, "main");
        assert!(fns[1].params.is_empty());
        assert_eq!(texts(&fns[1].body_statements), vec!["int x = 1;", "if (x)", "x++;"]);
    }

    #[test]
    fn statement_splitting_keeps_for_headers_and_initializers() {
        let f = function_from_body("f", "for (i = 0; i < n; i++) { a[i] = 0; }\nint v[2] = {1, 2};\n").unwrap();
        assert_eq!(texts(&f.body_statements), vec!["for (i = 0; i < n; i++)", "a[i] = 0;", "int v[2] = {1, 2};"]);
    }

    #[test]
    fn def_use_rules() {
        let du = def_use(&lex("char *p = b, q[10];"));
        assert_eq!(du.defs, vars(&["p", "q"]));
        assert_eq!(du.uses, vars(&["b"]));

        let du = def_use(&lex("s->buf[i] = strlen(src) + n;"));
        assert_eq!(du.defs, vars(&["s"]));
        assert_eq!(du.uses, vars(&["i", "src", "n"]));

        let du = def_use(&lex("*p += 1;"));
        assert_eq!(du.defs, vars(&["p"]));

        let du = def_use(&lex("size_t len;"));
        assert_eq!(du.defs, vars(&["len"]));

        let du = def_use(&lex("++count;"));
        assert_eq!(du.defs, vars(&["count"]));

        let du = def_use(&lex("if ((n = recv(fd, buf, 10, 0)) > 0)"));
        assert_eq!(du.defs, vars(&["n"]));
        assert_eq!(du.uses, vars(&["fd", "buf"]));

        let du = def_use(&lex("my_t *node = NULL;"));
        assert_eq!(du.defs, vars(&["node"]));
    }

    #[test]
    fn sink_calls() {
        let calls = find_sink_calls(&lex("strcpy(p, src);"), &SinkConfig::default());
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].callee, "strcpy");
        assert_eq!(calls[0].direction, Direction::Backward);
        assert_eq!(calls[0].args, vec!["p", "src"]);

        let calls = find_sink_calls(&lex("recv(fd, buf, n, 0);"), &SinkConfig::default());
        assert_eq!(calls[0].direction, Direction::Forward);
        assert_eq!(calls[0].args, vec!["fd", "buf", "n"]);

        assert!(find_sink_calls(&lex("printf(\"%d\", x);"), &SinkConfig::default()).is_empty());
        assert!(find_sink_calls(&lex("obj.read(x);"), &SinkConfig::default()).is_empty());
    }

    #[test]
    fn backward_slice_chases_definitions() {
        let f = function_from_body("f", "char b[10];\nchar *p = b;\nstrcpy(p, s);\n").unwrap();
        let slice = backward_slice(&f, &vars(&["p", "s"]), 2).unwrap();
        assert_eq!(texts(&slice), vec!["char b[10];", "char *p = b;", "strcpy(p, s);"]);
    }

    #[test]
    fn backward_slice_same_line_statements() {
        let f = function_from_body("f", "char b[10]; char*p=b; strcpy(p,s);").unwrap();
        let seed = f.statement_containing(lex("char b[10]; char*p=b; strcpy(p,s);")[12].offset).unwrap();
        assert_eq!(seed, 2);
        let slice = backward_slice(&f, &vars(&["p", "s"]), seed).unwrap();
        assert_eq!(slice.len(), 3);
    }

    #[test]
    fn backward_slice_unassigned_seed_and_unrelated_statements() {
        let f = function_from_body("f", "int z = 0;\nstrcpy(p, s);\n").unwrap();
        assert_eq!(texts(&backward_slice(&f, &vars(&["p", "s"]), 1).unwrap()), vec!["strcpy(p, s);"]);

        let f = function_from_body("f", "char b[10];\nint z = 0;\nchar *p = b;\nstrcpy(p, s);\n").unwrap();
        assert_eq!(
            texts(&backward_slice(&f, &vars(&["p", "s"]), 3).unwrap()),
            vec!["char b[10];", "char *p = b;", "strcpy(p, s);"]
        );
    }

    #[test]
    fn forward_slice_follows_uses() {
        let f = function_from_body("f", "n = recv(fd, buf, 10, 0);\nm = n + 1;\nuse(m);\n").unwrap();
        assert_eq!(forward_slice(&f, &vars(&["n"]), 0).unwrap().len(), 3);

        let f = function_from_body("f", "n = recv(fd, buf, 10, 0);\nk = 2;\n").unwrap();
        assert_eq!(texts(&forward_slice(&f, &vars(&["n"]), 0).unwrap()), vec!["n = recv(fd, buf, 10, 0);"]);
    }

    #[test]
    fn reassignment_keeps_tracking() {
        let f = function_from_body("f", "n = recv(fd, buf, 10, 0);\nn = 0;\nm = n;\n").unwrap();
        assert_eq!(
            texts(&forward_slice(&f, &vars(&["n"]), 0).unwrap()),
            vec!["n = recv(fd, buf, 10, 0);", "n = 0;", "m = n;"]
        );
    }

    #[test]
    fn seed_outside_function() {
        let f = function_from_body("f", "x = 1;\n").unwrap();
        assert!(matches!(backward_slice(&f, &vars(&["x"]), 3), Err(SliceError::SeedOutsideFunction { .. })));
        assert!(matches!(forward_slice(&f, &vars(&["x"]), 1), Err(SliceError::SeedOutsideFunction { .. })));
        assert!(matches!(f.statement_at_line(9), Err(SliceError::NoStatementAtLine { line: 9, .. })));
    }

    #[test]
    fn gadget_assembly() {
        let f = function_from_body("f", "a = 1;\nstrcpy(a, b);\nc = a;\n").unwrap();
        let back = backward_slice(&f, &vars(&["a"]), 1).unwrap();
        let fwd = forward_slice(&f, &vars(&["a"]), 1).unwrap();
        let g = assemble_gadget(&[back.clone(), fwd.clone()]).unwrap();
        assert_eq!(texts(&g), vec!["a = 1;", "strcpy(a, b);", "c = a;"]);
        assert_eq!(assemble_gadget(&[back.clone()]).unwrap(), back);

        let s = &f.body_statements;
        let g = assemble_gadget(&[vec![s[2].clone()], vec![s[0].clone()]]).unwrap();
        assert_eq!(texts(&g), vec!["a = 1;", "c = a;"]);
        assert_eq!(assemble_gadget(&[]), Err(SliceError::EmptyGadget));
    }

    #[test]
    fn extracts_one_gadget_per_sink() {
        let src = "void copy(char *src) {\n  char buf[8];\n  int unused = 3;\n  strcpy(buf, src);\n}\n";
        let unit = extract_gadgets(src, &SinkConfig::default()).unwrap();
        assert_eq!(unit.gadgets.len(), 1);
        assert_eq!(unit.gadgets[0].code_lines(), vec!["char buf[8];", "strcpy(buf, src);"]);
        assert!(unit.user_functions.contains("copy"));
    }

    fn random_body() -> impl Strategy<Value = String> {
        let var = proptest::sample::select(vec!["a", "b", "c", "d", "e", "f"]);
        let stmt = (var.clone(), var.clone(), var).prop_map(|(x, y, z)| alloc::format!("{x} = {y} + {z};"));
        proptest::collection::vec(stmt, 1..12).prop_map(|v| v.join("\n"))
    }

    proptest! {
        #[test]
        fn slices_are_ordered_subsequences(body in random_body(), seed_frac in 0.0f64..1.0) {
            let f = function_from_body("f", &body).unwrap();
            let seed = ((f.body_statements.len() as f64) * seed_frac) as usize;
            for slice in [
                backward_slice(&f, &vars(&["a"]), seed).unwrap(),
                forward_slice(&f, &vars(&["a"]), seed).unwrap(),
            ] {
                let mut it = f.body_statements.iter();
                for s in &slice {
                    prop_assert!(it.any(|x| x == s));
                }
            }
        }

        #[test]
        fn backward_slice_is_monotone(body in random_body(), seed_frac in 0.0f64..1.0) {
            let f = function_from_body("f", &body).unwrap();
            let seed = ((f.body_statements.len() as f64) * seed_frac) as usize;
            let small = backward_slice(&f, &vars(&["a"]), seed).unwrap();
            let big = backward_slice(&f, &vars(&["a", "c"]), seed).unwrap();
            for s in &small {
                prop_assert!(big.contains(s));
            }
        }

        #[test]
        fn gadget_assembly_is_idempotent(body in random_body()) {
            let f = function_from_body("f", &body).unwrap();
            let last = f.body_statements.len() - 1;
            let g = assemble_gadget(&[
                backward_slice(&f, &vars(&["b"]), last).unwrap(),
                forward_slice(&f, &vars(&["b"]), 0).unwrap(),
            ]).unwrap();
            prop_assert_eq!(assemble_gadget(&[g.clone()]).unwrap(), g);
        }
    }
}

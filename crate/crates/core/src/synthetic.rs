//! Planted-signal corpora: short C-like slices whose label is tied to a
//! constructed token or token pair, used as learnability checks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{train_count, CorpusError, Kind, Label, SliceRecord};
use crate::embed::{EmbedError, EmbeddingTable};
use crate::lexer::lex_c_source;
use crate::seeded;

/// Call present in every positive slice of a token-signal corpus and in no
/// negative one.
pub const PLANTED_TOKEN: &str = "strcpy";
/// Calls that appear together only in positive slices of a
/// co-occurrence-signal corpus; each also appears alone in negatives.
pub const PLANTED_PAIR: (&str, &str) = ("realloc", "memmove");

const VARIABLES: [&str; 14] =
    ["buf", "src", "dst", "len", "n", "i", "p", "tmp", "count", "size", "ptr", "data", "str", "idx"];
const NEUTRAL_CALLS: [&str; 5] = ["printf", "strlen", "memset", "malloc", "free"];
const NUMBERS: [&str; 5] = ["0", "1", "8", "16", "64"];
/// Statements per slice. Planted calls replace filler statements, so slice
/// length (and with it the number of distinct variables) says nothing
/// about the label.
const SLICE_LINES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// Label 1 iff the slice calls [`PLANTED_TOKEN`].
    Token,
    /// Label 1 iff the slice calls both members of [`PLANTED_PAIR`].
    Cooccur,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::Token => "token",
            Signal::Cooccur => "cooccur",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Signal {
    type Err = SyntheticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(Signal::Token),
            "cooccur" => Ok(Signal::Cooccur),
            _ => Err(SyntheticError::UnknownSignal(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error("need at least 2 slices, got {0}")]
    TooFew(usize),
    #[error("vulnerable fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
    #[error("unknown signal {0:?} (expected token or cooccur)")]
    UnknownSignal(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub vuln_fraction: f64,
    pub signal: Signal,
    pub seed: u64,
}

/// Number of positives in a corpus of `n` slices, `round(n · fraction)`.
pub fn positive_count(n: usize, fraction: f64) -> usize {
    train_count(n, fraction)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn filler_line(rng: &mut ChaCha8Rng) -> String {
    let v = pick(rng, &VARIABLES);
    let w = pick(rng, &VARIABLES);
    let k = pick(rng, &NUMBERS);
    match rng.random_range(0..9) {
        0 => format!("int {v} = {k};"),
        8 => format!("{}({v}, {w}, {k});", pick(rng, &NEUTRAL_CALLS)),
        1 => format!("char {v}[{k}];"),
        2 => format!("{v} = {w} + {k};"),
        3 => format!("{}({v}, {w});", pick(rng, &NEUTRAL_CALLS)),
        4 => format!("{v} = {}({w});", pick(rng, &NEUTRAL_CALLS)),
        5 => format!("if ({v} < {k}) {w} = {k};"),
        6 => format!("for ({v} = 0; {v} < {w}; {v}++) {w} -= {k};"),
        _ => format!("return {v};"),
    }
}

fn call_line(rng: &mut ChaCha8Rng, callee: &str) -> String {
    let v = pick(rng, &VARIABLES);
    let w = pick(rng, &VARIABLES);
    format!("{callee}({v}, {w}, {});", pick(rng, &NUMBERS))
}

/// Generates `spec.n` records with ids `1..=n`; exactly
/// [`positive_count`] of them are labeled vulnerable, at seeded positions.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<SliceRecord>, SyntheticError> {
    if spec.n < 2 {
        return Err(SyntheticError::TooFew(spec.n));
    }
    if !(0.0..=1.0).contains(&spec.vuln_fraction) {
        return Err(SyntheticError::BadFraction(spec.vuln_fraction));
    }
    let mut rng = seeded::rng(spec.seed);
    let n_pos = positive_count(spec.n, spec.vuln_fraction);
    let mut labels: Vec<Label> =
        (0..spec.n).map(|i| if i < n_pos { Label::Vulnerable } else { Label::Safe }).collect();
    labels.shuffle(&mut rng);

    let mut records = Vec::with_capacity(spec.n);
    let mut negatives_seen = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let planted: Vec<&str> = match (spec.signal, label) {
            (Signal::Token, Label::Vulnerable) => alloc::vec![PLANTED_TOKEN],
            (Signal::Token, Label::Safe) => Vec::new(),
            (Signal::Cooccur, Label::Vulnerable) => alloc::vec![PLANTED_PAIR.0, PLANTED_PAIR.1],
            (Signal::Cooccur, Label::Safe) => {
                // Negatives cycle through: first call only, second only,
                // neither, so neither call alone predicts the label.
                negatives_seen += 1;
                match negatives_seen % 3 {
                    1 => alloc::vec![PLANTED_PAIR.0],
                    2 => alloc::vec![PLANTED_PAIR.1],
                    _ => Vec::new(),
                }
            }
        };
        let mut lines: Vec<String> = (0..SLICE_LINES - planted.len()).map(|_| filler_line(&mut rng)).collect();
        for callee in planted {
            let at = rng.random_range(0..=lines.len());
            let line = call_line(&mut rng, callee);
            lines.insert(at, line);
        }
        let id = i as u64 + 1;
        records.push(SliceRecord::new(
            id,
            format!("synthetic:{}:{id}", spec.signal),
            lines,
            label,
            Kind::Gadget,
        )?);
    }
    Ok(records)
}

fn identifiers(record: &SliceRecord) -> Vec<String> {
    let mut out = Vec::new();
    for line in &record.code_lines {
        if let Ok(tokens) = lex_c_source(line) {
            out.extend(tokens.into_iter().filter(|t| t.is_identifier()).map(|t| t.text));
        }
    }
    out
}

/// Scans `records` and reports whether the planted pattern holds exactly:
/// present in every positive and absent from every negative.
pub fn planted_signal_holds(records: &[SliceRecord], signal: Signal) -> bool {
    records.iter().all(|r| {
        let ids = identifiers(r);
        let has = |w: &str| ids.iter().any(|t| t == w);
        let present = match signal {
            Signal::Token => has(PLANTED_TOKEN),
            Signal::Cooccur => has(PLANTED_PAIR.0) && has(PLANTED_PAIR.1),
        };
        present == (r.label == Label::Vulnerable)
    })
}

/// Label-independent Gaussian slice vectors, one per id, seeded by the id.
/// They stand in for external embeddings that carry no label signal.
pub fn noise_embeddings(ids: impl IntoIterator<Item = u64>, dim: usize, seed: u64) -> Result<EmbeddingTable, EmbedError> {
    let mut table = EmbeddingTable::new(dim)?;
    let scale = 1.0 / libm::sqrt(dim as f64);
    for id in ids {
        let mut rng = seeded::keyed_rng(&id.to_le_bytes(), seed ^ 0x6e6f_6973_65);
        let v = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
        table.insert(id, v)?;
    }
    Ok(table)
}

//! Labeled slice corpora: records, train/test splits and summary counts.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::seeded;

/// Separator line closing every block of the gadget corpus text format.
pub const BLOCK_SEPARATOR: &str = "---------------------------------";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("slice {id} has no code lines")]
    EmptyCode { id: u64 },
    #[error("slice {id} has a code line that cannot be stored: {reason}")]
    BadCodeLine { id: u64, reason: &'static str },
    #[error("slice ids must be strictly increasing: {id} follows {previous}")]
    IdsNotIncreasing { previous: u64, id: u64 },
    #[error("label not in {{0,1}}: {0}")]
    BadLabel(u32),
    #[error("unknown slice kind {0:?}")]
    BadKind(String),
    #[error("corpus is empty")]
    Empty,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Safe = 0,
    Vulnerable = 1,
}

impl Label {
    pub fn from_u32(v: u32) -> Result<Self, CorpusError> {
        match v {
            0 => Ok(Label::Safe),
            1 => Ok(Label::Vulnerable),
            other => Err(CorpusError::BadLabel(other)),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Vulnerability-syntax category of a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Kind {
    /// Library/API function call.
    Fc,
    /// Array usage.
    Au,
    /// Pointer usage.
    Pu,
    /// Arithmetic expression.
    Ae,
    /// Code gadget without a finer category.
    #[default]
    Gadget,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Fc, Kind::Au, Kind::Pu, Kind::Ae, Kind::Gadget];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Fc => "FC",
            Kind::Au => "AU",
            Kind::Pu => "PU",
            Kind::Ae => "AE",
            Kind::Gadget => "GADGET",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| CorpusError::BadKind(s.into()))
    }
}

/// One labeled code slice, the unit of classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceRecord {
    pub id: u64,
    /// Provenance: source path, function and line, free text.
    pub origin: String,
    pub code_lines: Vec<String>,
    pub label: Label,
    pub kind: Kind,
}

impl SliceRecord {
    pub fn new(
        id: u64,
        origin: impl Into<String>,
        code_lines: Vec<String>,
        label: Label,
        kind: Kind,
    ) -> Result<Self, CorpusError> {
        let record = Self { id, origin: origin.into(), code_lines, label, kind };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.code_lines.is_empty() {
            return Err(CorpusError::EmptyCode { id: self.id });
        }
        if self.origin.contains('\n') {
            return Err(CorpusError::BadCodeLine { id: self.id, reason: "origin spans lines" });
        }
        for line in &self.code_lines {
            if line.contains('\n') {
                return Err(CorpusError::BadCodeLine { id: self.id, reason: "embedded newline" });
            }
            if line == BLOCK_SEPARATOR {
                return Err(CorpusError::BadCodeLine { id: self.id, reason: "equals the block separator" });
            }
        }
        Ok(())
    }
}

/// A list of records with an optional train/test partition of their ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<SliceRecord>,
    pub train_ids: BTreeSet<u64>,
    pub test_ids: BTreeSet<u64>,
}

impl Corpus {
    /// Validates every record and that ids strictly increase. No split is assigned.
    pub fn new(records: Vec<SliceRecord>) -> Result<Self, CorpusError> {
        let mut previous: Option<u64> = None;
        for r in &records {
            r.validate()?;
            if let Some(p) = previous {
                if r.id <= p {
                    return Err(CorpusError::IdsNotIncreasing { previous: p, id: r.id });
                }
            }
            previous = Some(r.id);
        }
        Ok(Self { records, train_ids: BTreeSet::new(), test_ids: BTreeSet::new() })
    }

    pub fn records(&self) -> &[SliceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SliceRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_split(&self) -> bool {
        !self.train_ids.is_empty() || !self.test_ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub train_fraction: f64,
    pub seed: u64,
    /// Split each label class separately so both sets keep the class ratio.
    pub stratify: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 0, stratify: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitWarning {
    EmptyTestSet,
    EmptyTrainSet,
}

impl fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitWarning::EmptyTestSet => f.write_str("test set is empty"),
            SplitWarning::EmptyTrainSet => f.write_str("train set is empty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
    pub warnings: Vec<SplitWarning>,
}

/// Round-half-up count of training items.
pub fn train_count(n: usize, fraction: f64) -> usize {
    let count = libm::floor(fraction * n as f64 + 0.5) as usize;
    count.min(n)
}

/// Splits `(id, label)` entries into train and test id sets with a seeded
/// shuffle. Entry order matters only through the shuffle, which is
/// deterministic for a given seed.
pub fn split_ids(entries: &[(u64, Label)], opts: SplitOptions) -> Result<Split, CorpusError> {
    if entries.is_empty() {
        return Err(CorpusError::Empty);
    }
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(opts.train_fraction));
    }
    let mut rng = seeded::rng(opts.seed);
    let groups: Vec<Vec<u64>> = if opts.stratify {
        [Label::Safe, Label::Vulnerable]
            .iter()
            .map(|&l| entries.iter().filter(|e| e.1 == l).map(|e| e.0).collect())
            .collect()
    } else {
        alloc::vec![entries.iter().map(|e| e.0).collect()]
    };

    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for mut ids in groups {
        ids.shuffle(&mut rng);
        let cut = train_count(ids.len(), opts.train_fraction);
        train.extend(ids[..cut].iter().copied());
        test.extend(ids[cut..].iter().copied());
    }

    let mut warnings = Vec::new();
    if test.is_empty() {
        warnings.push(SplitWarning::EmptyTestSet);
    }
    if train.is_empty() {
        warnings.push(SplitWarning::EmptyTrainSet);
    }
    Ok(Split { train, test, warnings })
}

/// Assigns a train/test partition to a corpus.
pub fn split_corpus(corpus: Corpus, opts: SplitOptions) -> Result<(Corpus, Vec<SplitWarning>), CorpusError> {
    let entries: Vec<(u64, Label)> = corpus.records.iter().map(|r| (r.id, r.label)).collect();
    let split = split_ids(&entries, opts)?;
    let corpus = Corpus { records: corpus.records, train_ids: split.train, test_ids: split.test };
    Ok((corpus, split.warnings))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusStats {
    pub total: usize,
    pub vulnerable: usize,
    pub non_vulnerable: usize,
    /// Counts in [`Kind::ALL`] order.
    pub per_kind: [usize; 5],
}

impl CorpusStats {
    pub fn kind_count(&self, kind: Kind) -> usize {
        self.per_kind[Kind::ALL.iter().position(|&k| k == kind).unwrap_or(4)]
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats { total: corpus.len(), ..Default::default() };
    for r in corpus.records() {
        match r.label {
            Label::Vulnerable => stats.vulnerable += 1,
            Label::Safe => stats.non_vulnerable += 1,
        }
        let k = Kind::ALL.iter().position(|&k| k == r.kind).expect("kind listed in ALL");
        stats.per_kind[k] += 1;
    }
    stats
}

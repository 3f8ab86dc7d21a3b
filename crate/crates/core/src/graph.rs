//! Heterogeneous word–slice graph.
//!
//! Node order is `[word 0 .. word V-1, slice 0 .. slice N-1]`. Edge weights:
//!
//! | pair                  | weight                              |
//! |-----------------------|-------------------------------------|
//! | word i – word j, i≠j  | `max(ln(p(i,j) / (p(i) p(j))), 0)`  |
//! | slice – word          | `tf · ln(N / df)`, mirrored         |
//! | i = i                 | 1                                   |
//! | otherwise             | 0 (not stored)                      |
//!
//! Probabilities count slices containing a word (or pair); the optional
//! window mode counts fixed-size token windows instead.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{CsrMatrix, Matrix};
use crate::normalize::TokenizedSlice;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no word reaches min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("min_df must be at least 1")]
    BadMinDf,
    #[error("window size must be at least 2")]
    BadWindow,
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("graph has {expected} nodes but {what} has {found} rows")]
    NodeCountMismatch { what: &'static str, expected: usize, found: usize },
    #[error("adjacency is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("node {0} has no self-loop")]
    MissingSelfLoop(usize),
    #[error("adjacency weight at ({row}, {col}) is {value}")]
    BadWeight { row: usize, col: usize, value: f64 },
    #[error("adjacency has not been normalized")]
    NotNormalized,
    #[error("node features have not been assembled")]
    NoFeatures,
}

/// Word → node index and document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    df: Vec<usize>,
    n_slices: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Number of slices containing the word at `index`.
    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Total number of slices the vocabulary was built from.
    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    /// `ln(N / df)` for the word at `index`.
    pub fn idf(&self, index: usize) -> f64 {
        libm::log(self.n_slices as f64 / self.df[index] as f64)
    }
}

/// Indexes every word whose document frequency is at least `min_df`, in
/// order of first occurrence.
pub fn build_vocab(corpus: &[TokenizedSlice], min_df: usize) -> Result<Vocabulary, GraphError> {
    if min_df == 0 {
        return Err(GraphError::BadMinDf);
    }
    if corpus.is_empty() {
        return Err(GraphError::EmptyCorpus);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut last_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (s, slice) in corpus.iter().enumerate() {
        for tok in &slice.tokens {
            let tok = tok.as_str();
            match last_seen.insert(tok, s) {
                None => {
                    order.push(tok);
                    df.insert(tok, 1);
                }
                Some(prev) if prev != s => *df.get_mut(tok).expect("seen before") += 1,
                Some(_) => {}
            }
        }
    }
    let mut vocab = Vocabulary { words: Vec::new(), index: BTreeMap::new(), df: Vec::new(), n_slices: corpus.len() };
    for w in order {
        let d = df[w];
        if d >= min_df {
            vocab.index.insert(w.into(), vocab.words.len());
            vocab.words.push(w.into());
            vocab.df.push(d);
        }
    }
    if vocab.is_empty() {
        return Err(GraphError::EmptyVocabulary { min_df });
    }
    Ok(vocab)
}

/// Raw count of `word` in `slice` times `ln(N / df)`.
pub fn tf_idf(slice: &TokenizedSlice, word: &str, vocab: &Vocabulary) -> Result<f64, GraphError> {
    let idx = vocab.index_of(word).ok_or_else(|| GraphError::UnknownWord(word.into()))?;
    let tf = slice.tokens.iter().filter(|t| *t == word).count();
    Ok(tf as f64 * vocab.idf(idx))
}

/// `max(ln(p_ij / (p_i p_j)), 0)`, and 0 when the pair never co-occurs.
pub fn ppmi_from_probs(p_i: f64, p_j: f64, p_ij: f64) -> f64 {
    if p_ij <= 0.0 {
        return 0.0;
    }
    let pmi = libm::log(p_ij / (p_i * p_j));
    if pmi > 0.0 {
        pmi
    } else {
        0.0
    }
}

/// Marginal and joint occurrence probabilities of vocabulary words over
/// contexts (slices, or token windows).
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    contexts: usize,
    word_counts: Vec<usize>,
    /// Keyed by `(i, j)` with `i < j`.
    pair_counts: BTreeMap<(usize, usize), usize>,
}

impl CooccurrenceStats {
    /// One context per slice.
    pub fn from_slices(corpus: &[TokenizedSlice], vocab: &Vocabulary) -> Self {
        let mut stats = Self::empty(vocab.len());
        for slice in corpus {
            stats.add_context(slice.tokens.iter(), vocab);
        }
        stats
    }

    /// One context per sliding window of `window` tokens; a slice shorter
    /// than the window is a single context.
    pub fn from_windows(corpus: &[TokenizedSlice], vocab: &Vocabulary, window: usize) -> Result<Self, GraphError> {
        if window < 2 {
            return Err(GraphError::BadWindow);
        }
        let mut stats = Self::empty(vocab.len());
        for slice in corpus {
            if slice.tokens.len() <= window {
                stats.add_context(slice.tokens.iter(), vocab);
            } else {
                for w in slice.tokens.windows(window) {
                    stats.add_context(w.iter(), vocab);
                }
            }
        }
        Ok(stats)
    }

    fn empty(n_words: usize) -> Self {
        Self { contexts: 0, word_counts: vec![0; n_words], pair_counts: BTreeMap::new() }
    }

    fn add_context<'a>(&mut self, tokens: impl Iterator<Item = &'a String>, vocab: &Vocabulary) {
        let mut present: Vec<usize> = tokens.filter_map(|t| vocab.index_of(t)).collect();
        present.sort_unstable();
        present.dedup();
        self.contexts += 1;
        for (a, &i) in present.iter().enumerate() {
            self.word_counts[i] += 1;
            for &j in &present[a + 1..] {
                *self.pair_counts.entry((i, j)).or_insert(0) += 1;
            }
        }
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn p(&self, i: usize) -> f64 {
        self.word_counts[i] as f64 / self.contexts as f64
    }

    pub fn p_joint(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pair_counts.get(&key).copied().unwrap_or(0) as f64 / self.contexts as f64
    }

    pub fn ppmi(&self, i: usize, j: usize) -> f64 {
        ppmi_from_probs(self.p(i), self.p(j), self.p_joint(i, j))
    }

    /// Pairs `(i, j)`, `i < j`, that co-occur at least once.
    pub fn cooccurring_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pair_counts.keys().copied()
    }
}

/// The word–slice graph with its adjacency, normalized adjacency and node
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct TextGraph {
    words: Vec<String>,
    slice_ids: Vec<u64>,
    adjacency: CsrMatrix,
    normalized: Option<CsrMatrix>,
    features: Option<Matrix>,
}

impl TextGraph {
    /// Wraps an existing adjacency after checking the structural invariants:
    /// square, symmetric, unit diagonal, finite non-negative weights.
    pub fn from_adjacency(words: Vec<String>, slice_ids: Vec<u64>, adjacency: CsrMatrix) -> Result<Self, GraphError> {
        let n = words.len() + slice_ids.len();
        if adjacency.n_rows() != n || adjacency.n_cols() != n {
            return Err(GraphError::NodeCountMismatch { what: "adjacency", expected: n, found: adjacency.n_rows() });
        }
        for (r, c, v) in adjacency.triplets() {
            if !(v.is_finite() && v >= 0.0) || (r == c && v != 1.0) {
                return Err(GraphError::BadWeight { row: r, col: c, value: v });
            }
            if adjacency.get(c, r) != v {
                return Err(GraphError::NotSymmetric { row: r, col: c });
            }
        }
        if let Some(i) = (0..n).find(|&i| !adjacency.contains(i, i)) {
            return Err(GraphError::MissingSelfLoop(i));
        }
        Ok(Self { words, slice_ids, adjacency, normalized: None, features: None })
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_slices(&self) -> usize {
        self.slice_ids.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.words.len() + self.slice_ids.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn slice_ids(&self) -> &[u64] {
        &self.slice_ids
    }

    /// Node index of the `k`-th slice.
    pub fn slice_node(&self, k: usize) -> usize {
        self.words.len() + k
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn normalized(&self) -> Option<&CsrMatrix> {
        self.normalized.as_ref()
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, Matrix::cols)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self, GraphError> {
        if features.rows() != self.n_nodes() {
            return Err(GraphError::NodeCountMismatch {
                what: "feature matrix",
                expected: self.n_nodes(),
                found: features.rows(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }
}

/// Assembles the adjacency from a corpus and statistics computed on it.
pub fn build_adjacency(corpus: &[TokenizedSlice], vocab: &Vocabulary, stats: &CooccurrenceStats) -> TextGraph {
    let v = vocab.len();
    let n = v + corpus.len();
    let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();

    for (i, j) in stats.cooccurring_pairs() {
        let w = stats.ppmi(i, j);
        if w > 0.0 {
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
    }

    for (k, slice) in corpus.iter().enumerate() {
        let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
        for tok in &slice.tokens {
            if let Some(idx) = vocab.index_of(tok) {
                *tf.entry(idx).or_insert(0) += 1;
            }
        }
        let node = v + k;
        for (idx, count) in tf {
            let w = count as f64 * vocab.idf(idx);
            if w > 0.0 {
                triplets.push((node, idx, w));
                triplets.push((idx, node, w));
            }
        }
    }

    TextGraph {
        words: vocab.words().to_vec(),
        slice_ids: corpus.iter().map(|s| s.slice_id).collect(),
        adjacency: CsrMatrix::from_triplets(n, n, triplets),
        normalized: None,
        features: None,
    }
}

/// `D^{-1/2} A D^{-1/2}` with `D` the row sums of `A`.
pub fn normalize_adjacency(mut g: TextGraph) -> TextGraph {
    g.normalized = Some(sym_normalize(&g.adjacency));
    g
}

pub fn sym_normalize(a: &CsrMatrix) -> CsrMatrix {
    let inv_sqrt: Vec<f64> = a.row_sums().into_iter().map(|d| 1.0 / libm::sqrt(d)).collect();
    a.map_entries(|r, c, v| v * (inv_sqrt[r] * inv_sqrt[c]))
}

/// How word–word co-occurrence is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CooccurrenceMode {
    #[default]
    Slice,
    Window(usize),
}

/// Vocabulary, statistics, adjacency and normalization in one call.
pub fn build_graph(corpus: &[TokenizedSlice], min_df: usize, mode: CooccurrenceMode) -> Result<(Vocabulary, TextGraph), GraphError> {
    let vocab = build_vocab(corpus, min_df)?;
    let stats = match mode {
        CooccurrenceMode::Slice => CooccurrenceStats::from_slices(corpus, &vocab),
        CooccurrenceMode::Window(w) => CooccurrenceStats::from_windows(corpus, &vocab, w)?,
    };
    let graph = normalize_adjacency(build_adjacency(corpus, &vocab, &stats));
    Ok((vocab, graph))
}

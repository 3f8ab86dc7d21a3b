//! Node features: externally computed slice embeddings plus seeded Gaussian
//! vectors for word nodes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::{GraphError, TextGraph};
use crate::linalg::Matrix;
use crate::normalize::TokenizedSlice;
use crate::seeded;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("row {id}: expected {expected} values, found {found}")]
    DimMismatch { id: u64, expected: usize, found: usize },
    #[error("duplicate slice id {0}")]
    DuplicateId(u64),
    #[error("row {id}: non-finite value")]
    NonFinite { id: u64 },
    #[error("no embedding for slice {0}")]
    MissingSlice(u64),
    #[error("word features are {found}-dimensional, slice embeddings {expected}-dimensional")]
    FeatureDimMismatch { expected: usize, found: usize },
    #[error("no tokens supplied for slice {0} in mean-of-words mode")]
    MissingTokens(u64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Slice id → fixed-length vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<u64, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        Ok(Self { dim, vectors: BTreeMap::new() })
    }

    pub fn insert(&mut self, id: u64, vector: Vec<f64>) -> Result<(), EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch { id, expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite { id });
        }
        if self.vectors.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&[f64]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.vectors.iter().map(|(&id, v)| (id, v.as_slice()))
    }
}

/// Deterministic feature vector for one word: i.i.d. standard normal entries
/// scaled by `1/√dim`, seeded by the word text and `seed` only.
pub fn word_vector(word: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded::keyed_rng(word.as_bytes(), seed);
    let scale = 1.0 / libm::sqrt(dim as f64);
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
}

/// One row per word, in the given order.
pub fn word_node_features(words: &[alloc::string::String], dim: usize, seed: u64) -> Result<Matrix, EmbedError> {
    if dim == 0 {
        return Err(EmbedError::ZeroDim);
    }
    let data: Vec<f64> = words.iter().flat_map(|w| word_vector(w, dim, seed)).collect();
    Ok(Matrix::from_vec(words.len(), dim, data))
}

/// Where slice-node rows come from.
#[derive(Debug, Clone, Copy)]
pub enum SliceFeatures<'a> {
    /// Every slice must have a vector in the table.
    Table(&'a EmbeddingTable),
    /// Table vectors where present, otherwise the mean of the slice's word
    /// vectors.
    TableOrMeanOfWords(&'a EmbeddingTable, &'a [TokenizedSlice]),
    /// Mean of the slice's word vectors (token occurrences outside the
    /// vocabulary are skipped; a slice with none gets a zero row).
    MeanOfWords(&'a [TokenizedSlice]),
}

/// Builds `X`: word rows first, then slice rows in node order.
pub fn assemble_feature_matrix(g: TextGraph, words: &Matrix, slices: SliceFeatures<'_>) -> Result<TextGraph, EmbedError> {
    if words.rows() != g.n_words() {
        return Err(GraphError::NodeCountMismatch { what: "word features", expected: g.n_words(), found: words.rows() }
            .into());
    }
    let dim = words.cols();
    let table = match slices {
        SliceFeatures::Table(t) | SliceFeatures::TableOrMeanOfWords(t, _) => Some(t),
        SliceFeatures::MeanOfWords(_) => None,
    };
    if let Some(t) = table {
        if t.dim() != dim {
            return Err(EmbedError::FeatureDimMismatch { expected: t.dim(), found: dim });
        }
    }
    let tokens_by_id: BTreeMap<u64, &TokenizedSlice> = match slices {
        SliceFeatures::TableOrMeanOfWords(_, toks) | SliceFeatures::MeanOfWords(toks) => {
            toks.iter().map(|t| (t.slice_id, t)).collect()
        }
        SliceFeatures::Table(_) => BTreeMap::new(),
    };
    let word_index: BTreeMap<&str, usize> = g.words().iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();

    let mut x = Matrix::zeros(g.n_nodes(), dim);
    for r in 0..g.n_words() {
        x.row_mut(r).copy_from_slice(words.row(r));
    }
    for (k, &id) in g.slice_ids().iter().enumerate() {
        let row = x.row_mut(g.n_words() + k);
        if let Some(v) = table.and_then(|t| t.get(id)) {
            row.copy_from_slice(v);
            continue;
        }
        if matches!(slices, SliceFeatures::Table(_)) {
            return Err(EmbedError::MissingSlice(id));
        }
        let toks = tokens_by_id.get(&id).ok_or(EmbedError::MissingTokens(id))?;
        let mut count = 0usize;
        for tok in &toks.tokens {
            if let Some(&w) = word_index.get(tok.as_str()) {
                for (x, &wv) in row.iter_mut().zip(words.row(w)) {
                    *x += wv;
                }
                count += 1;
            }
        }
        if count > 0 {
            let inv = 1.0 / count as f64;
            row.iter_mut().for_each(|x| *x *= inv);
        }
    }
    Ok(g.with_features(x)?)
}

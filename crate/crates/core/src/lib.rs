//! Vulnerability detection over C/C++ code slices with a word–slice graph
//! convolutional network.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithmic
//! stage of the pipeline:
//!
//! - [`corpus`]: labeled slice records, train/test splitting, statistics
//! - [`lexer`] and [`slicer`]: C lexing, function spans, sink calls and
//!   intra-procedural def-use slicing into code gadgets
//! - [`normalize`]: comment stripping, symbolization (`V1`, `F1`, ...) and
//!   tokenization
//! - [`graph`]: vocabulary, TF-IDF slice–word edges, PPMI word–word edges and
//!   the normalized adjacency
//! - [`embed`]: node feature assembly
//! - [`gcn`]: the two-layer graph convolutional classifier, trained with Adam
//! - [`baseline`]: a linear classifier over slice features alone
//! - [`eval`]: confusion counts and accuracy / precision / recall / F1
//! - [`synthetic`]: planted-signal corpora for desk-scale experiments
//!
//! File formats, IO and the command line live in the `slicegraph` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod gcn;
pub mod graph;
pub mod lexer;
pub mod linalg;
pub mod normalize;
pub mod slicer;
pub mod synthetic;

mod seeded;

pub use corpus::{Corpus, Kind, Label, SliceRecord};
pub use eval::{ConfusionMatrix, EvalReport};
pub use gcn::{GcnParams, TrainConfig};
pub use graph::TextGraph;
pub use normalize::TokenizedSlice;

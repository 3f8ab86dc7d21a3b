//! File formats, pipeline stages and the command line around
//! [`slicegraph_core`].
//!
//! Every intermediate artifact is a plain-text file that the next stage
//! reads on its own:
//!
//! ```text
//! extract      C sources      -> gadget corpus (+ .funcs sidecar)
//! normalize    gadget corpus  -> tokenized slices
//! build-graph  tokens         -> graph dump (adjacency, nodes, features)
//! train        graph + tokens -> checkpoint
//! eval         graph + tokens + checkpoint -> report
//! ```
//!
//! `pipeline` runs normalize through eval in one process and writes the same
//! files.

pub mod cli;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result, Stage};

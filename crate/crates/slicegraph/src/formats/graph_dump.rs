//! Graph dump:
//!
//! ```text
//! nodes=<V+N> words=<V> slices=<N> dim=<d>
//! <i> <j> <weight>            one line per stored adjacency entry
//! word <idx> <token>          node legend
//! slice <idx> <slice_id>
//! x <idx> <f1> ... <fd>       feature rows, present when dim > 0
//! ```
//!
//! Weights and features carry 17 significant digits, so a dump reloads to a
//! bit-identical graph. The raw adjacency is stored; the normalized one is
//! recomputed on load.

use std::path::Path;

use slicegraph_core::graph::{normalize_adjacency, TextGraph};
use slicegraph_core::linalg::{CsrMatrix, Matrix};

use super::{f17, numbered_lines, read_text};
use crate::error::{ParseError, Result};

pub fn write_graph(g: &TextGraph) -> String {
    let mut out = format!(
        "nodes={} words={} slices={} dim={}\n",
        g.n_nodes(),
        g.n_words(),
        g.n_slices(),
        g.feature_dim()
    );
    for (i, j, w) in g.adjacency().triplets() {
        out.push_str(&format!("{i} {j} {}\n", f17(w)));
    }
    for (i, w) in g.words().iter().enumerate() {
        out.push_str(&format!("word {i} {w}\n"));
    }
    for (k, id) in g.slice_ids().iter().enumerate() {
        out.push_str(&format!("slice {} {id}\n", g.slice_node(k)));
    }
    if let Some(x) = g.features() {
        for r in 0..x.rows() {
            let row: Vec<String> = x.row(r).iter().map(|&v| f17(v)).collect();
            out.push_str(&format!("x {r} {}\n", row.join(" ")));
        }
    }
    out
}

fn header_field(field: Option<&str>, key: &str) -> Option<usize> {
    field?.strip_prefix(key)?.strip_prefix('=')?.parse().ok()
}

/// Parses a dump into a graph with normalized adjacency and, when present,
/// features.
pub fn parse_graph(text: &str, path: &Path) -> Result<TextGraph, ParseError> {
    let mut lines = numbered_lines(text);
    let (_, header) = lines.next().ok_or_else(|| ParseError::new(path, 1, "empty graph file"))?;
    let mut h = header.split(' ');
    let parsed = (
        header_field(h.next(), "nodes"),
        header_field(h.next(), "words"),
        header_field(h.next(), "slices"),
        header_field(h.next(), "dim"),
    );
    let (Some(nodes), Some(n_words), Some(n_slices), Some(dim)) = parsed else {
        return Err(ParseError::new(path, 1, format!("malformed header {header:?}")));
    };
    if nodes != n_words + n_slices {
        return Err(ParseError::new(path, 1, format!("nodes={nodes} but words+slices={}", n_words + n_slices)));
    }

    let mut triplets = Vec::new();
    let mut words: Vec<Option<String>> = vec![None; n_words];
    let mut slices: Vec<Option<u64>> = vec![None; n_slices];
    let mut features = if dim > 0 { Some(Matrix::zeros(nodes, dim)) } else { None };
    let mut feature_rows = 0usize;
    for (n, line) in lines {
        let err = |msg: String| ParseError::new(path, n, msg);
        let bad_index = |idx: &str| err(format!("bad node index {idx:?}"));
        let mut f = line.splitn(3, ' ');
        let (Some(a), Some(b), Some(c)) = (f.next(), f.next(), f.next()) else {
            return Err(err(format!("unrecognized line {line:?}")));
        };
        match a {
            "word" => {
                let i: usize = b.parse().map_err(|_| bad_index(b))?;
                let slot = words.get_mut(i).ok_or_else(|| bad_index(b))?;
                *slot = Some(c.to_string());
            }
            "slice" => {
                let i: usize = b.parse().map_err(|_| bad_index(b))?;
                let slot = i.checked_sub(n_words).and_then(|k| slices.get_mut(k)).ok_or_else(|| bad_index(b))?;
                *slot = Some(c.parse().map_err(|_| err(format!("bad slice id {c:?}")))?);
            }
            "x" => {
                let x = features.as_mut().ok_or_else(|| err("feature row in a dim=0 dump".into()))?;
                let r: usize = b.parse().map_err(|_| bad_index(b))?;
                if r >= nodes {
                    return Err(bad_index(b));
                }
                let values: Vec<f64> = c
                    .split(' ')
                    .map(|v| v.parse().map_err(|_| err(format!("bad feature value {v:?}"))))
                    .collect::<Result<_, _>>()?;
                if values.len() != dim {
                    return Err(err(format!("feature row {r}: expected {dim} values, found {}", values.len())));
                }
                x.row_mut(r).copy_from_slice(&values);
                feature_rows += 1;
            }
            _ => {
                let i: usize = a.parse().map_err(|_| err(format!("unrecognized line {line:?}")))?;
                let j: usize = b.parse().map_err(|_| bad_index(b))?;
                let w: f64 = c.parse().map_err(|_| err(format!("bad weight {c:?}")))?;
                if i >= nodes || j >= nodes {
                    return Err(err(format!("entry ({i}, {j}) outside {nodes} nodes")));
                }
                triplets.push((i, j, w));
            }
        }
    }
    let missing = |what: &str, idx: usize| ParseError::new(path, 1, format!("legend has no {what} for node {idx}"));
    let words: Vec<String> =
        words.into_iter().enumerate().map(|(i, w)| w.ok_or_else(|| missing("word", i))).collect::<Result<_, _>>()?;
    let slice_ids: Vec<u64> = slices
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or_else(|| missing("slice", n_words + k)))
        .collect::<Result<_, _>>()?;
    if features.is_some() && feature_rows != nodes {
        return Err(ParseError::new(path, 1, format!("dim={dim} but {feature_rows} of {nodes} feature rows present")));
    }

    let adjacency = CsrMatrix::from_triplets(nodes, nodes, triplets);
    let g = TextGraph::from_adjacency(words, slice_ids, adjacency).map_err(|e| ParseError::new(path, 1, e.to_string()))?;
    let g = normalize_adjacency(g);
    match features {
        Some(x) => g.with_features(x).map_err(|e| ParseError::new(path, 1, e.to_string())),
        None => Ok(g),
    }
}

pub fn read_graph(path: &Path) -> Result<TextGraph> {
    Ok(parse_graph(&read_text(path)?, path)?)
}

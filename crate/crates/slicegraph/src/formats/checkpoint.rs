//! Model checkpoint: a line-oriented text file with a header, the training
//! configuration, the train/test split, every parameter tensor row by row
//! (17 significant digits) and the loss histories.
//!
//! ```text
//! slicegraph-checkpoint 1
//! rule relu(D^-1/2 A D^-1/2 H W + b)
//! d_in 64
//! hidden 200
//! classes 2
//! learning_rate 0.001
//! ...
//! train_ids 1 2 5 ...
//! test_ids 3 4 ...
//! tensor W1 64 200
//! <64 lines of 200 values>
//! ...
//! loss_history 200
//! <one value per line>
//! objective_history 200
//! <one value per line>
//! ```

use std::path::Path;

use slicegraph_core::gcn::{GcnParams, TrainConfig, CLASSES, PROPAGATION_RULE, TENSOR_NAMES};
use slicegraph_core::linalg::Matrix;

use super::{f17, numbered_lines, read_text};
use crate::error::{ParseError, Result};

const MAGIC: &str = "slicegraph-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: GcnParams,
    pub train_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    pub loss_history: Vec<f64>,
    pub objective_history: Vec<f64>,
}

/// `key value` lines of a training configuration, in a fixed order. Also
/// used for the configuration echo of reports.
pub fn config_lines(cfg: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("learning_rate", format!("{:?}", cfg.learning_rate)),
        ("epochs", cfg.epochs.to_string()),
        ("dropout_p", format!("{:?}", cfg.dropout_p)),
        ("single_dropout", cfg.single_dropout.to_string()),
        ("prior_bias", cfg.prior_bias.to_string()),
        ("hidden", cfg.hidden.to_string()),
        ("seed", cfg.seed.to_string()),
        ("beta1", format!("{:?}", cfg.beta1)),
        ("beta2", format!("{:?}", cfg.beta2)),
        ("epsilon", format!("{:?}", cfg.epsilon)),
    ]
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_checkpoint(c: &Checkpoint) -> String {
    let mut out = format!("{MAGIC}\nrule {PROPAGATION_RULE}\n");
    out.push_str(&format!("d_in {}\nclasses {CLASSES}\n", c.params.d_in()));
    for (k, v) in config_lines(&c.config) {
        out.push_str(&format!("{k} {v}\n"));
    }
    out.push_str(&format!("train_ids {}\ntest_ids {}\n", join_ids(&c.train_ids), join_ids(&c.test_ids)));
    let shapes = tensor_shapes(&c.params);
    for ((name, values), (rows, cols)) in TENSOR_NAMES.iter().zip(c.params.tensors()).zip(shapes) {
        out.push_str(&format!("tensor {name} {rows} {cols}\n"));
        for row in values.chunks(cols) {
            let row: Vec<String> = row.iter().map(|&v| f17(v)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    for (name, hist) in [("loss_history", &c.loss_history), ("objective_history", &c.objective_history)] {
        out.push_str(&format!("{name} {}\n", hist.len()));
        for &v in hist.iter() {
            out.push_str(&f17(v));
            out.push('\n');
        }
    }
    out
}

fn tensor_shapes(p: &GcnParams) -> [(usize, usize); 6] {
    let (d, h) = (p.d_in(), p.hidden());
    [(d, h), (1, h), (h, h), (1, h), (h, CLASSES), (1, CLASSES)]
}

struct Reader<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: I,
    path: &'a Path,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Reader<'a, I> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.path, self.last, msg)
    }

    fn line(&mut self) -> Result<&'a str, ParseError> {
        match self.lines.next() {
            Some((n, l)) => {
                self.last = n;
                Ok(l)
            }
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    /// Reads `key <value>` and returns the value text.
    fn keyed(&mut self, key: &str) -> Result<&'a str, ParseError> {
        let line = self.line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            None if line == key => Ok(""),
            _ => Err(self.err(format!("expected `{key} ...`, got {line:?}"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ParseError> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for {key}: {v:?}")))
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>, ParseError> {
        let line = self.line()?;
        let values: Vec<f64> = line
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.err(format!("bad number {s:?}"))))
            .collect::<Result<_, _>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }

    fn ids(&mut self, key: &str) -> Result<Vec<u64>, ParseError> {
        let v = self.keyed(key)?;
        v.split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.err(format!("bad id {s:?}"))))
            .collect()
    }

    fn history(&mut self, key: &str) -> Result<Vec<f64>, ParseError> {
        let n: usize = self.parsed(key)?;
        (0..n).map(|_| self.floats(1).map(|v| v[0])).collect()
    }
}

pub fn parse_checkpoint(text: &str, path: &Path) -> Result<Checkpoint, ParseError> {
    let mut r = Reader { lines: numbered_lines(text), path, last: 1 };
    if r.line()? != MAGIC {
        return Err(r.err("not a slicegraph checkpoint"));
    }
    let rule = r.keyed("rule")?;
    if rule != PROPAGATION_RULE {
        return Err(r.err(format!("unsupported propagation rule {rule:?}")));
    }
    let d_in: usize = r.parsed("d_in")?;
    let classes: usize = r.parsed("classes")?;
    if classes != CLASSES {
        return Err(r.err(format!("expected {CLASSES} classes, found {classes}")));
    }
    let config = TrainConfig {
        learning_rate: r.parsed("learning_rate")?,
        epochs: r.parsed("epochs")?,
        dropout_p: r.parsed("dropout_p")?,
        single_dropout: r.parsed("single_dropout")?,
        prior_bias: r.parsed("prior_bias")?,
        hidden: r.parsed("hidden")?,
        seed: r.parsed("seed")?,
        beta1: r.parsed("beta1")?,
        beta2: r.parsed("beta2")?,
        epsilon: r.parsed("epsilon")?,
    };
    let train_ids = r.ids("train_ids")?;
    let test_ids = r.ids("test_ids")?;

    let mut params = GcnParams::zeros(d_in, config.hidden);
    let shapes = tensor_shapes(&params);
    for ((name, tensor), (rows, cols)) in TENSOR_NAMES.iter().zip(params.tensors_mut()).zip(shapes) {
        let header = r.keyed("tensor")?;
        if header != format!("{name} {rows} {cols}") {
            return Err(r.err(format!("expected tensor {name} {rows} {cols}, got {header:?}")));
        }
        for row in 0..rows {
            let values = r.floats(cols)?;
            tensor[row * cols..(row + 1) * cols].copy_from_slice(&values);
        }
    }
    params.validate().map_err(|e| r.err(e.to_string()))?;
    let loss_history = r.history("loss_history")?;
    let objective_history = r.history("objective_history")?;
    Ok(Checkpoint { config, params, train_ids, test_ids, loss_history, objective_history })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Ok(parse_checkpoint(&read_text(path)?, path)?)
}

/// Rebuilds a matrix-shaped view of a checkpoint tensor, for inspection.
pub fn tensor_matrix(values: &[f64], cols: usize) -> Matrix {
    Matrix::from_vec(values.len() / cols, cols, values.to_vec())
}

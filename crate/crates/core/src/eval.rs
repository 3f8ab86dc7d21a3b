//! Confusion counts and detection metrics, with vulnerable (label 1) as the
//! positive class.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::corpus::{Kind, Label};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {truth} ground-truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no evaluated samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Vulnerable, Label::Vulnerable) => self.tp += 1,
            (Label::Safe, Label::Safe) => self.tn += 1,
            (Label::Vulnerable, Label::Safe) => self.fp += 1,
            (Label::Safe, Label::Vulnerable) => self.fn_ += 1,
        }
    }
}

pub fn confusion(predictions: &[Label], truth: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), truth: truth.len() });
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        c.record(p, t);
    }
    Ok(c)
}

/// A metric whose denominator was zero and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricWarning {
    /// No positive predictions.
    PrecisionUndefined,
    /// No positive samples.
    RecallUndefined,
    /// Precision + recall = 0.
    F1Undefined,
}

impl fmt::Display for MetricWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricWarning::PrecisionUndefined => "precision undefined (no positive predictions), reported as 0",
            MetricWarning::RecallUndefined => "recall undefined (no positive samples), reported as 0",
            MetricWarning::F1Undefined => "F1 undefined (precision + recall = 0), reported as 0",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub warnings: Vec<MetricWarning>,
    /// Optional per-kind confusion counts.
    pub per_kind: Vec<(Kind, ConfusionMatrix)>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy `(TP+TN)/total`, precision `TP/(TP+FP)`, recall `TP/(TP+FN)`
/// and F1, the harmonic mean of precision and recall. F1 is evaluated as
/// `2TP / (2TP + FP + FN)`, the same quantity with a single rounding.
pub fn metrics(c: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let mut warnings = Vec::new();
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let precision = ratio(c.tp, c.tp + c.fp).unwrap_or_else(|| {
        warnings.push(MetricWarning::PrecisionUndefined);
        0.0
    });
    let recall = ratio(c.tp, c.tp + c.fn_).unwrap_or_else(|| {
        warnings.push(MetricWarning::RecallUndefined);
        0.0
    });
    let f1 = if c.tp > 0 {
        (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64
    } else {
        warnings.push(MetricWarning::F1Undefined);
        0.0
    };
    Ok(EvalReport { confusion: *c, accuracy, precision, recall, f1, warnings, per_kind: Vec::new() })
}

/// Confusion counts per kind, for the kinds that occur, in [`Kind::ALL`]
/// order. The three lists run in parallel.
pub fn confusion_by_kind(
    kinds: &[Kind],
    predictions: &[Label],
    truth: &[Label],
) -> Result<Vec<(Kind, ConfusionMatrix)>, EvalError> {
    if predictions.len() != truth.len() || kinds.len() != truth.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), truth: truth.len().min(kinds.len()) });
    }
    let mut out = Vec::new();
    for kind in Kind::ALL {
        let mut c = ConfusionMatrix::default();
        for ((&k, &p), &t) in kinds.iter().zip(predictions).zip(truth) {
            if k == kind {
                c.record(p, t);
            }
        }
        if c.total() > 0 {
            out.push((kind, c));
        }
    }
    Ok(out)
}

/// Confusion counts and metrics for parallel prediction/truth lists.
pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<EvalReport, EvalError> {
    metrics(&confusion(predictions, truth)?)
}

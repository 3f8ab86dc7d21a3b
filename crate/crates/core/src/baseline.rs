//! Linear softmax classifier over per-slice feature vectors alone, with no
//! graph. It gets the same Adam settings as the graph model and is reported
//! with the same metrics, so the two can be compared on one corpus.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Label;
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::gcn::{GcnError, TrainConfig, CLASSES};
use crate::linalg::Matrix;
use crate::seeded;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("{rows} feature rows for {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("no training rows")]
    EmptyTrain,
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error(transparent)]
    Train(#[from] GcnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Weights `d × 2` and bias of the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl LinearModel {
    fn logits(&self, x: &[f64]) -> [f64; CLASSES] {
        let mut z = [self.b[0], self.b[1]];
        for (i, &xi) in x.iter().enumerate() {
            let w = self.w.row(i);
            z[0] += xi * w[0];
            z[1] += xi * w[1];
        }
        z
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let z = self.logits(x);
        if z[1] > z[0] {
            Label::Vulnerable
        } else {
            Label::Safe
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub model: LinearModel,
    /// Metrics on the test rows.
    pub report: EvalReport,
    pub loss_history: Vec<f64>,
    /// Every training row carried the same label, so the model can only
    /// learn a constant.
    pub degenerate_labels: bool,
}

fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [libm::exp(z[0] - m), libm::exp(z[1] - m)];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Trains on `train` rows of `features` for `cfg.epochs` full-batch Adam
/// steps (weights initialized like the graph model's output layer) and
/// evaluates on `test` rows.
pub fn baseline_linear(
    features: &Matrix,
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    cfg: &TrainConfig,
) -> Result<BaselineOutcome, BaselineError> {
    if features.rows() != labels.len() {
        return Err(BaselineError::LengthMismatch { rows: features.rows(), labels: labels.len() });
    }
    if train.is_empty() {
        return Err(BaselineError::EmptyTrain);
    }
    if let Some(&r) = train.iter().chain(test).find(|&&r| r >= labels.len()) {
        return Err(BaselineError::RowOutOfRange(r));
    }
    cfg.validate()?;

    let d = features.cols();
    let mut rng = seeded::rng(cfg.seed);
    let sd = libm::sqrt(2.0 / d.max(1) as f64);
    let mut model = LinearModel {
        w: Matrix::from_fn(d, CLASSES, |_, _| rng.sample::<f64, _>(StandardNormal) * sd),
        b: vec![0.0; CLASSES],
    };
    let n_params = d * CLASSES + CLASSES;
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let inv_n = 1.0 / train.len() as f64;

    for epoch in 0..cfg.epochs {
        let mut grad = vec![0.0; n_params];
        let mut loss = 0.0;
        for &r in train {
            let x = features.row(r);
            let p = softmax2(model.logits(x));
            let y = labels[r].as_index();
            loss -= libm::log(p[y]);
            for c in 0..CLASSES {
                let g = (p[c] - if c == y { 1.0 } else { 0.0 }) * inv_n;
                for (i, &xi) in x.iter().enumerate() {
                    grad[i * CLASSES + c] += xi * g;
                }
                grad[d * CLASSES + c] += g;
            }
        }
        loss *= inv_n;
        if !loss.is_finite() {
            return Err(GcnError::Diverged { epoch }.into());
        }
        loss_history.push(loss);

        let t = (epoch + 1) as f64;
        let bc1 = 1.0 - libm::pow(cfg.beta1, t);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t);
        let (w, b) = (model.w.as_mut_slice(), &mut model.b);
        for k in 0..n_params {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            let step = cfg.learning_rate * (m[k] / bc1) / (libm::sqrt(v[k] / bc2) + cfg.epsilon);
            if k < d * CLASSES {
                w[k] -= step;
            } else {
                b[k - d * CLASSES] -= step;
            }
        }
    }

    let predictions: Vec<Label> = test.iter().map(|&r| model.predict(features.row(r))).collect();
    let truth: Vec<Label> = test.iter().map(|&r| labels[r]).collect();
    let report = evaluate(&predictions, &truth)?;
    let degenerate_labels = train.iter().all(|&r| labels[r] == labels[train[0]]);
    Ok(BaselineOutcome { model, report, loss_history, degenerate_labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { learning_rate: 0.05, epochs, ..Default::default() }
    }

    #[test]
    fn separable_two_points() {
        let x = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let labels = [Label::Safe, Label::Vulnerable];
        let out = baseline_linear(&x, &labels, &[0, 1], &[0, 1], &cfg(200)).unwrap();
        assert_eq!(out.report.f1, 1.0);
        assert!(!out.degenerate_labels);
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
    }

    #[test]
    fn single_label_is_flagged() {
        let x = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]);
        let labels = [Label::Safe; 3];
        let out = baseline_linear(&x, &labels, &[0, 1], &[2], &cfg(20)).unwrap();
        assert!(out.degenerate_labels);
        assert!(!out.report.warnings.is_empty());
    }

    #[test]
    fn contract_errors() {
        let x = Matrix::zeros(2, 1);
        let labels = [Label::Safe];
        assert_eq!(
            baseline_linear(&x, &labels, &[0], &[0], &cfg(1)).unwrap_err(),
            BaselineError::LengthMismatch { rows: 2, labels: 1 }
        );
        let labels = [Label::Safe, Label::Safe];
        assert_eq!(baseline_linear(&x, &labels, &[], &[0], &cfg(1)).unwrap_err(), BaselineError::EmptyTrain);
        assert_eq!(baseline_linear(&x, &labels, &[0], &[5], &cfg(1)).unwrap_err(), BaselineError::RowOutOfRange(5));
    }
}

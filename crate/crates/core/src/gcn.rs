//! Two-layer graph convolutional classifier.
//!
//! Layer stack, with `Â` the symmetrically normalized adjacency:
//!
//! ```text
//! H1     = ReLU(Â X  W1 + b1)          graph conv, width 200
//! H2     = ReLU(Â H1 W2 + b2)          graph conv, width 200
//! D      = dropout(dropout(H2))        two independent inverted-dropout masks
//! logits = D W_out + b_out             dense, 2 classes
//! ```
//!
//! Training is full-graph and transductive: every node takes part in
//! propagation, only the labeled training nodes enter the softmax
//! cross-entropy. Gradients are derived by hand and optimized with Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::Label;
use crate::graph::TextGraph;
use crate::linalg::{CsrMatrix, Matrix};
use crate::seeded::{self, Fingerprint};

/// Width of both graph-convolution layers.
pub const HIDDEN: usize = 200;
/// Output classes: non-vulnerable, vulnerable.
pub const CLASSES: usize = 2;

/// Name of the propagation rule, echoed in reports and checkpoints.
pub const PROPAGATION_RULE: &str = "relu(D^-1/2 A D^-1/2 H W + b)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GcnError {
    #[error("feature matrix has {features} columns but W1 expects {expected}")]
    ShapeMismatch { features: usize, expected: usize },
    #[error("adjacency is {rows}x{cols} but there are {nodes} feature rows")]
    AdjacencyMismatch { rows: usize, cols: usize, nodes: usize },
    #[error("graph has no normalized adjacency")]
    NotNormalized,
    #[error("graph has no node features")]
    NoFeatures,
    #[error("no labeled nodes selected")]
    EmptyMask,
    #[error("node {node} is outside the graph ({nodes} nodes)")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("cached activations belong to a different graph")]
    StaleCache,
    #[error("backward needs a cache from a train-mode forward pass")]
    EvalCache,
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(&'static str),
    #[error("parameter {name} has shape {found:?}, expected {expected:?}")]
    BadParamShape { name: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("parameter {0} has a non-finite entry")]
    NonFiniteParam(&'static str),
}

/// The normalized adjacency and features a forward pass reads.
#[derive(Debug, Clone, Copy)]
pub struct GcnInput<'a> {
    adjacency: &'a CsrMatrix,
    features: &'a Matrix,
}

impl<'a> GcnInput<'a> {
    pub fn new(adjacency: &'a CsrMatrix, features: &'a Matrix) -> Result<Self, GcnError> {
        if adjacency.n_rows() != features.rows() || adjacency.n_cols() != features.rows() {
            return Err(GcnError::AdjacencyMismatch {
                rows: adjacency.n_rows(),
                cols: adjacency.n_cols(),
                nodes: features.rows(),
            });
        }
        Ok(Self { adjacency, features })
    }

    pub fn from_graph(g: &'a TextGraph) -> Result<Self, GcnError> {
        let adjacency = g.normalized().ok_or(GcnError::NotNormalized)?;
        let features = g.features().ok_or(GcnError::NoFeatures)?;
        Self::new(adjacency, features)
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.write_u64(self.adjacency.n_rows() as u64);
        for (r, c, v) in self.adjacency.triplets() {
            h.write_u64(r as u64);
            h.write_u64(c as u64);
            h.write_u64(v.to_bits());
        }
        h.write_u64(self.features.cols() as u64);
        for &x in self.features.as_slice() {
            h.write_u64(x.to_bits());
        }
        h.finish()
    }
}

/// Weights and biases of the layer stack. Also used as the container for
/// gradients and Adam moments, which share its shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Names of the parameter tensors, in [`GcnParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 6] = ["W1", "b1", "W2", "b2", "W_out", "b_out"];

impl GcnParams {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        Self {
            w1: Matrix::zeros(d_in, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, hidden),
            b2: vec![0.0; hidden],
            w_out: Matrix::zeros(hidden, CLASSES),
            b_out: vec![0.0; CLASSES],
        }
    }

    /// Gaussian weights with standard deviation `√(2 / fan_in)`, zero biases.
    pub fn init(d_in: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded::rng(seed);
        let mut gaussian = |rows: usize, cols: usize| {
            let sd = libm::sqrt(2.0 / rows as f64);
            Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal) * sd)
        };
        let w1 = gaussian(d_in, hidden);
        let w2 = gaussian(hidden, hidden);
        let w_out = gaussian(hidden, CLASSES);
        Self { w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; hidden], w_out, b_out: vec![0.0; CLASSES] }
    }

    /// Checks shapes against each other and that every entry is finite.
    pub fn validate(&self) -> Result<(), GcnError> {
        let (d_in, hidden) = self.w1.shape();
        let expect = [
            ("W1", (d_in, hidden), self.w1.shape()),
            ("b1", (1, hidden), (1, self.b1.len())),
            ("W2", (hidden, hidden), self.w2.shape()),
            ("b2", (1, hidden), (1, self.b2.len())),
            ("W_out", (hidden, CLASSES), self.w_out.shape()),
            ("b_out", (1, CLASSES), (1, self.b_out.len())),
        ];
        for (name, expected, found) in expect {
            if expected != found {
                return Err(GcnError::BadParamShape { name, expected, found });
            }
        }
        for (name, t) in TENSOR_NAMES.iter().zip(self.tensors()) {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(GcnError::NonFiniteParam(name));
            }
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2, self.w_out.as_slice(), &self.b_out]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
            self.w_out.as_mut_slice(),
            &mut self.b_out,
        ]
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Drop probability of each dropout layer.
    pub dropout_p: f64,
    /// Collapse the two dropout layers into one.
    pub single_dropout: bool,
    /// Start the output bias at the training label log-odds instead of 0.
    /// See [`calibrate_output_bias`].
    pub prior_bias: bool,
    pub hidden: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 4,
            dropout_p: 0.5,
            single_dropout: false,
            prior_bias: true,
            hidden: HIDDEN,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GcnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GcnError::BadConfig("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(GcnError::BadConfig("dropout probability must lie in [0, 1)"));
        }
        if self.hidden == 0 {
            return Err(GcnError::BadConfig("hidden width must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(GcnError::BadConfig("Adam needs beta1, beta2 in [0, 1) and epsilon > 0"));
        }
        Ok(())
    }

    fn dropout_layers(&self) -> usize {
        if self.single_dropout {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks drawn from `seed`.
    Train { seed: u64 },
    /// Dropout is the identity.
    Eval,
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    ax: Matrix,
    z1: Matrix,
    ah1: Matrix,
    z2: Matrix,
    /// Combined inverted-dropout scale per hidden unit, train mode only.
    dropout_scale: Option<Matrix>,
    dropped: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = libm::exp(*x - max);
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    p
}

fn dropout_scale(rows: usize, cols: usize, p: f64, layers: usize, seed: u64) -> Matrix {
    let mut rng = seeded::rng(seed);
    let keep_scale = 1.0 / (1.0 - p);
    let mut scale = Matrix::from_fn(rows, cols, |_, _| 1.0);
    for _ in 0..layers {
        for x in scale.as_mut_slice() {
            let drop = rng.random::<f64>() < p;
            *x = if drop { 0.0 } else { *x * keep_scale };
        }
    }
    scale
}

/// Runs the layer stack over every node.
pub fn forward(input: &GcnInput<'_>, params: &GcnParams, mode: Mode, cfg: &TrainConfig) -> Result<ForwardCache, GcnError> {
    if input.feature_dim() != params.d_in() {
        return Err(GcnError::ShapeMismatch { features: input.feature_dim(), expected: params.d_in() });
    }
    let a = input.adjacency;
    let ax = a.mul_dense(input.features);
    let mut z1 = ax.matmul(&params.w1);
    z1.add_row(&params.b1);
    let h1 = z1.map(relu);
    let ah1 = a.mul_dense(&h1);
    let mut z2 = ah1.matmul(&params.w2);
    z2.add_row(&params.b2);
    let h2 = z2.map(relu);

    let (dropout_scale, dropped) = match mode {
        Mode::Train { seed } if cfg.dropout_p > 0.0 => {
            let s = dropout_scale(h2.rows(), h2.cols(), cfg.dropout_p, cfg.dropout_layers(), seed);
            let d = h2.hadamard(&s);
            (Some(s), d)
        }
        Mode::Train { .. } => (Some(Matrix::from_fn(h2.rows(), h2.cols(), |_, _| 1.0)), h2),
        Mode::Eval => (None, h2),
    };
    let mut logits = dropped.matmul(&params.w_out);
    logits.add_row(&params.b_out);
    let probs = softmax_rows(&logits);
    Ok(ForwardCache { fingerprint: input.fingerprint(), ax, z1, ah1, z2, dropout_scale, dropped, logits, probs })
}

/// `(node, label)` pairs that supervise training. Listing a node twice
/// doubles its weight.
pub type Targets = [(usize, Label)];

fn check_targets(targets: &Targets, n_nodes: usize) -> Result<(), GcnError> {
    if targets.is_empty() {
        return Err(GcnError::EmptyMask);
    }
    if let Some(&(node, _)) = targets.iter().find(|t| t.0 >= n_nodes) {
        return Err(GcnError::NodeOutOfRange { node, nodes: n_nodes });
    }
    Ok(())
}

/// Mean negative log-probability of the true class over `targets`, from
/// the cached logits (dropout included for a train-mode cache).
pub fn loss(cache: &ForwardCache, targets: &Targets) -> Result<f64, GcnError> {
    loss_from_logits(&cache.logits, targets)
}

/// Loss the same parameters give with dropout switched off. The layers
/// before dropout are shared between modes, so this reuses the cache.
pub fn deterministic_loss(cache: &ForwardCache, params: &GcnParams, targets: &Targets) -> Result<f64, GcnError> {
    let mut logits = cache.z2.map(relu).matmul(&params.w_out);
    logits.add_row(&params.b_out);
    loss_from_logits(&logits, targets)
}

fn loss_from_logits(logits: &Matrix, targets: &Targets) -> Result<f64, GcnError> {
    check_targets(targets, logits.rows())?;
    let mut total = 0.0;
    for &(node, label) in targets {
        let row = logits.row(node);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
        total += lse - row[label.as_index()];
    }
    Ok(total / targets.len() as f64)
}

/// Loss from a plain probability matrix, for callers that only hold
/// predictions.
pub fn loss_from_probs(probs: &[[f64; CLASSES]], labels: &[Label]) -> Result<f64, GcnError> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(GcnError::EmptyMask);
    }
    let total: f64 = probs.iter().zip(labels).map(|(p, l)| -libm::log(p[l.as_index()])).sum();
    Ok(total / probs.len() as f64)
}

/// Exact gradient of [`loss`] with respect to every parameter.
pub fn backward(
    input: &GcnInput<'_>,
    params: &GcnParams,
    cache: &ForwardCache,
    targets: &Targets,
) -> Result<GcnParams, GcnError> {
    if cache.fingerprint != input.fingerprint() {
        return Err(GcnError::StaleCache);
    }
    let scale = cache.dropout_scale.as_ref().ok_or(GcnError::EvalCache)?;
    check_targets(targets, cache.probs.rows())?;

    let inv_m = 1.0 / targets.len() as f64;
    let mut d_logits = Matrix::zeros(cache.probs.rows(), CLASSES);
    for &(node, label) in targets {
        let p = cache.probs.row(node);
        let g = d_logits.row_mut(node);
        for c in 0..CLASSES {
            let onehot = if c == label.as_index() { 1.0 } else { 0.0 };
            g[c] += (p[c] - onehot) * inv_m;
        }
    }

    let d_w_out = cache.dropped.t_matmul(&d_logits);
    let d_b_out = d_logits.column_sums();
    let d_h2 = d_logits.matmul_t(&params.w_out).hadamard(scale);
    let d_z2 = relu_grad(&d_h2, &cache.z2);
    let d_w2 = cache.ah1.t_matmul(&d_z2);
    let d_b2 = d_z2.column_sums();
    let d_h1 = input.adjacency.transpose_mul_dense(&d_z2.matmul_t(&params.w2));
    let d_z1 = relu_grad(&d_h1, &cache.z1);
    let d_w1 = cache.ax.t_matmul(&d_z1);
    let d_b1 = d_z1.column_sums();

    Ok(GcnParams { w1: d_w1, b1: d_b1, w2: d_w2, b2: d_b2, w_out: d_w_out, b_out: d_b_out })
}

fn relu_grad(upstream: &Matrix, pre_activation: &Matrix) -> Matrix {
    let mut out = upstream.clone();
    for (g, &z) in out.as_mut_slice().iter_mut().zip(pre_activation.as_slice()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GcnParams,
    pub v: GcnParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(d_in: usize, hidden: usize) -> Self {
        Self { m: GcnParams::zeros(d_in, hidden), v: GcnParams::zeros(d_in, hidden), t: 0 }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut GcnParams, grads: &GcnParams, cfg: &TrainConfig) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        let params_t = params.tensors_mut();
        let m_t = self.m.tensors_mut();
        let v_t = self.v.tensors_mut();
        for (((p, g), m), v) in params_t.into_iter().zip(grads.tensors()).zip(m_t).zip(v_t) {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: GcnParams,
    pub adam: AdamState,
    /// Training-node loss without dropout, one entry per epoch, measured
    /// before that epoch's update.
    pub loss_history: Vec<f64>,
    /// The optimized dropout-mode objective of each epoch (same timing).
    pub objective_history: Vec<f64>,
}

/// Dropout seed of one epoch.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_add(0x5851_f42d_4c95_7f2d).wrapping_mul(epoch as u64 + 1)
}

/// Full-graph training from a seeded initialization.
pub fn train(input: &GcnInput<'_>, cfg: &TrainConfig, targets: &Targets) -> Result<TrainOutcome, GcnError> {
    let mut params = GcnParams::init(input.feature_dim(), cfg.hidden, cfg.seed);
    if cfg.prior_bias {
        calibrate_output_bias(input, &mut params, targets)?;
    }
    train_from(input, cfg, targets, params)
}

/// Shifts `b_out` so that, averaged over `targets`, the initial logit margin
/// `z_vulnerable - z_safe` equals the log-odds of the target labels.
///
/// With all-positive ReLU activations feeding the output layer, the first
/// Adam steps otherwise spend themselves on learning the class prior and
/// overshoot it, which shows up as a bump in the early loss curve. Targets
/// of a single class leave the bias untouched.
pub fn calibrate_output_bias(input: &GcnInput<'_>, params: &mut GcnParams, targets: &Targets) -> Result<(), GcnError> {
    check_targets(targets, input.n_nodes())?;
    let positives = targets.iter().filter(|t| t.1 == Label::Vulnerable).count();
    if positives == 0 || positives == targets.len() {
        return Ok(());
    }
    let cache = forward(input, params, Mode::Eval, &TrainConfig::default())?;
    let m = targets.len() as f64;
    let margin: f64 = targets.iter().map(|&(n, _)| cache.logits[(n, 1)] - cache.logits[(n, 0)]).sum::<f64>() / m;
    if !margin.is_finite() {
        return Err(GcnError::Diverged { epoch: 0 });
    }
    let pi = positives as f64 / m;
    params.b_out[1] += libm::log(pi / (1.0 - pi)) - margin;
    Ok(())
}

/// Full-graph training from given parameters.
pub fn train_from(
    input: &GcnInput<'_>,
    cfg: &TrainConfig,
    targets: &Targets,
    mut params: GcnParams,
) -> Result<TrainOutcome, GcnError> {
    cfg.validate()?;
    params.validate()?;
    check_targets(targets, input.n_nodes())?;
    let mut adam = AdamState::new(params.d_in(), params.hidden());
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut objective_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let cache = forward(input, &params, Mode::Train { seed: epoch_seed(cfg.seed, epoch) }, cfg)?;
        let objective = loss(&cache, targets)?;
        let plain = deterministic_loss(&cache, &params, targets)?;
        if !objective.is_finite() || !plain.is_finite() {
            return Err(GcnError::Diverged { epoch });
        }
        loss_history.push(plain);
        objective_history.push(objective);
        let grads = backward(input, &params, &cache, targets)?;
        adam.step(&mut params, &grads, cfg);
    }
    Ok(TrainOutcome { params, adam, loss_history, objective_history })
}

/// Class probabilities and decisions for selected nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predictions {
    pub nodes: Vec<usize>,
    pub probs: Vec<[f64; CLASSES]>,
    pub labels: Vec<Label>,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn from_cache(cache: &ForwardCache, nodes: &[usize]) -> Result<Self, GcnError> {
        let n = cache.probs.rows();
        let mut out = Predictions::default();
        for &node in nodes {
            if node >= n {
                return Err(GcnError::NodeOutOfRange { node, nodes: n });
            }
            let row = cache.probs.row(node);
            let p = [row[0], row[1]];
            out.nodes.push(node);
            out.labels.push(if p[1] > p[0] { Label::Vulnerable } else { Label::Safe });
            out.probs.push(p);
        }
        Ok(out)
    }
}

/// Eval-mode forward restricted to `nodes`.
pub fn predict(input: &GcnInput<'_>, params: &GcnParams, nodes: &[usize]) -> Result<Predictions, GcnError> {
    let cache = forward(input, params, Mode::Eval, &TrainConfig::default())?;
    Predictions::from_cache(&cache, nodes)
}

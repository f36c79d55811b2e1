//! Two-layer mean-aggregation GraphSAGE encoder with a linear classification head.
//!
//! Each layer computes `relu(mean_{u in N(v)} h_u · W + h_v · B + b)`; nodes without
//! neighbors get a zero neighbor term. The head maps the 8-dimensional embedding
//! to two logits. Gradients are derived by hand and trained full-batch with Adam
//! on the summed cross-entropy of the labelled nodes.

use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unigraph::UnitigGraph;

pub const DEFAULT_HIDDEN: [usize; 2] = [16, 8];
pub const N_CLASSES: usize = 2;

const TENSOR_NAMES: [&str; 8] = [
    "neigh1", "self1", "bias1", "neigh2", "self2", "bias2", "head", "head_bias",
];

/// Trainable weights. Matrices are stored input-major (`in × out`) and biases as `1 × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct SageParams {
    pub neigh1: Array2<f64>,
    pub self1: Array2<f64>,
    pub bias1: Array2<f64>,
    pub neigh2: Array2<f64>,
    pub self2: Array2<f64>,
    pub bias2: Array2<f64>,
    pub head: Array2<f64>,
    pub head_bias: Array2<f64>,
}

impl SageParams {
    pub fn zeros(in_dim: usize, hidden: [usize; 2]) -> Self {
        let [h1, h2] = hidden;
        SageParams {
            neigh1: Array2::zeros((in_dim, h1)),
            self1: Array2::zeros((in_dim, h1)),
            bias1: Array2::zeros((1, h1)),
            neigh2: Array2::zeros((h1, h2)),
            self2: Array2::zeros((h1, h2)),
            bias2: Array2::zeros((1, h2)),
            head: Array2::zeros((h2, N_CLASSES)),
            head_bias: Array2::zeros((1, N_CLASSES)),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(in_dim: usize, hidden: [usize; 2], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = SageParams::zeros(in_dim, hidden);
        for t in [&mut p.neigh1, &mut p.self1, &mut p.neigh2, &mut p.self2, &mut p.head] {
            let (fan_in, fan_out) = t.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            t.mapv_inplace(|_| rng.gen_range(-limit..limit));
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.neigh1.nrows()
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.neigh1.ncols(), self.neigh2.ncols()]
    }

    pub fn tensors(&self) -> [&Array2<f64>; 8] {
        [
            &self.neigh1,
            &self.self1,
            &self.bias1,
            &self.neigh2,
            &self.self2,
            &self.bias2,
            &self.head,
            &self.head_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 8] {
        [
            &mut self.neigh1,
            &mut self.self1,
            &mut self.bias1,
            &mut self.neigh2,
            &mut self.self2,
            &mut self.bias2,
            &mut self.head,
            &mut self.head_bias,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn to_bundle(&self, seed: u64) -> ParamBundle {
        ParamBundle {
            seed,
            in_dim: self.in_dim(),
            hidden: self.hidden(),
            tensors: TENSOR_NAMES
                .iter()
                .zip(self.tensors())
                .map(|(name, t)| TensorJson {
                    name: name.to_string(),
                    shape: [t.nrows(), t.ncols()],
                    data: t.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_bundle(bundle: &ParamBundle) -> Result<Self> {
        if bundle.in_dim == 0 || bundle.hidden.contains(&0) {
            return Err(Error::Shape("zero-sized layer in parameter bundle".into()));
        }
        if bundle.in_dim > 1 << 16 || bundle.hidden.iter().any(|&h| h > 1 << 16) {
            return Err(Error::Shape("layer size in parameter bundle is implausibly large".into()));
        }
        let mut p = SageParams::zeros(bundle.in_dim, bundle.hidden);
        if bundle.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                TENSOR_NAMES.len(),
                bundle.tensors.len()
            )));
        }
        for ((dst, src), name) in p.tensors_mut().into_iter().zip(&bundle.tensors).zip(TENSOR_NAMES) {
            if src.name != name {
                return Err(Error::Shape(format!("expected tensor `{name}`, found `{}`", src.name)));
            }
            if src.shape != [dst.nrows(), dst.ncols()] || src.data.len() != dst.len() {
                return Err(Error::Shape(format!("tensor `{name}` has the wrong shape")));
            }
            if src.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shape(format!("tensor `{name}` has non-finite values")));
            }
            for (d, &s) in dst.iter_mut().zip(&src.data) {
                *d = s;
            }
        }
        Ok(p)
    }

    pub fn write_json<W: Write>(&self, seed: u64, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_bundle(seed))?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<(Self, u64)> {
        let bundle: ParamBundle = serde_json::from_reader(r)?;
        Ok((SageParams::from_bundle(&bundle)?, bundle.seed))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorJson {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Portable parameter file: shapes, row-major data and the training seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamBundle {
    pub seed: u64,
    pub in_dim: usize,
    pub hidden: [usize; 2],
    pub tensors: Vec<TensorJson>,
}

/// Mean over neighbor rows, excluding the node itself.
#[derive(Clone, Debug)]
pub struct MeanAggregator {
    neighbors: Vec<Vec<usize>>,
}

impl MeanAggregator {
    pub fn new(g: &UnitigGraph) -> Self {
        MeanAggregator {
            neighbors: (0..g.n_nodes()).map(|v| g.neighbors(v).collect()).collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn apply(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(h.raw_dim());
        for (v, nb) in self.neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let mut row = out.row_mut(v);
            for &u in nb {
                row += &h.row(u);
            }
            row /= nb.len() as f64;
        }
        out
    }

    /// Adjoint of [`apply`](Self::apply).
    pub fn apply_transpose(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(g.raw_dim());
        for (v, nb) in self.neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let scaled = &g.row(v) / nb.len() as f64;
            for &u in nb {
                let mut row = out.row_mut(u);
                row += &scaled;
            }
        }
        out
    }
}

/// Intermediate activations kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    agg0: Array2<f64>,
    pre1: Array2<f64>,
    h1: Array2<f64>,
    agg1: Array2<f64>,
    pre2: Array2<f64>,
    /// Node embeddings (`N × hidden[1]`).
    pub z: Array2<f64>,
    /// Head output before softmax (`N × 2`).
    pub logits: Array2<f64>,
}

impl ForwardPass {
    /// Sign pattern of both pre-activations, used to detect ReLU kink crossings.
    fn relu_pattern(&self) -> Vec<bool> {
        self.pre1.iter().chain(self.pre2.iter()).map(|&x| x > 0.0).collect()
    }
}

/// Embeddings and logits for every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub z: Array2<f64>,
    pub logits: Array2<f64>,
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn forward_with(x: &Array2<f64>, agg: &MeanAggregator, p: &SageParams) -> Result<ForwardPass> {
    if x.nrows() != agg.n_nodes() {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows but the graph has {} nodes",
            x.nrows(),
            agg.n_nodes()
        )));
    }
    if x.ncols() != p.in_dim() {
        return Err(Error::Shape(format!(
            "feature matrix has {} columns, parameters expect {}",
            x.ncols(),
            p.in_dim()
        )));
    }
    let agg0 = agg.apply(x);
    let pre1 = agg0.dot(&p.neigh1) + x.dot(&p.self1) + &p.bias1;
    let h1 = relu(&pre1);
    let agg1 = agg.apply(&h1);
    let pre2 = agg1.dot(&p.neigh2) + h1.dot(&p.self2) + &p.bias2;
    let z = relu(&pre2);
    let logits = z.dot(&p.head) + &p.head_bias;
    Ok(ForwardPass {
        agg0,
        pre1,
        h1,
        agg1,
        pre2,
        z,
        logits,
    })
}

pub fn forward(x: &Array2<f64>, g: &UnitigGraph, p: &SageParams) -> Result<Embeddings> {
    let fp = forward_with(x, &MeanAggregator::new(g), p)?;
    Ok(Embeddings {
        z: fp.z,
        logits: fp.logits,
    })
}

/// Summed softmax cross-entropy over `(node, class)` pairs, and its gradient
/// with respect to the logits (zero rows for nodes outside the training set).
pub fn loss_and_grad(logits: &Array2<f64>, training: &[(usize, usize)]) -> Result<(f64, Array2<f64>)> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for &(i, t) in training {
        let row = logits.row(i);
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum_exp: f64 = row.iter().map(|&l| (l - m).exp()).sum();
        let lse = m + sum_exp.ln();
        total += lse - row[t];
        for c in 0..row.len() {
            let prob = (row[c] - lse).exp();
            grad[[i, c]] = prob - if c == t { 1.0 } else { 0.0 };
        }
    }
    Ok((total, grad))
}

pub fn loss(logits: &Array2<f64>, training: &[(usize, usize)]) -> Result<f64> {
    loss_and_grad(logits, training).map(|(l, _)| l)
}

fn sum_rows(m: &Array2<f64>) -> Array2<f64> {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Gradient of the loss with respect to every parameter.
pub fn backward(
    x: &Array2<f64>,
    agg: &MeanAggregator,
    p: &SageParams,
    fp: &ForwardPass,
    dlogits: &Array2<f64>,
) -> SageParams {
    let head = fp.z.t().dot(dlogits);
    let head_bias = sum_rows(dlogits);
    let dz = dlogits.dot(&p.head.t());
    let mut dpre2 = dz;
    dpre2.zip_mut_with(&fp.pre2, |d, &pre| {
        if pre <= 0.0 {
            *d = 0.0
        }
    });
    let neigh2 = fp.agg1.t().dot(&dpre2);
    let self2 = fp.h1.t().dot(&dpre2);
    let bias2 = sum_rows(&dpre2);
    let mut dh1 = dpre2.dot(&p.self2.t()) + agg.apply_transpose(&dpre2.dot(&p.neigh2.t()));
    dh1.zip_mut_with(&fp.pre1, |d, &pre| {
        if pre <= 0.0 {
            *d = 0.0
        }
    });
    let neigh1 = fp.agg0.t().dot(&dh1);
    let self1 = x.t().dot(&dh1);
    let bias1 = sum_rows(&dh1);
    SageParams {
        neigh1,
        self1,
        bias1,
        neigh2,
        self2,
        bias2,
        head,
        head_bias,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: [usize; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            lr: 0.01,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

/// Adam with the usual defaults (β1 = 0.9, β2 = 0.999, ε = 1e-8).
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: SageParams,
    v: SageParams,
}

impl Adam {
    fn new(lr: f64, like: &SageParams) -> Self {
        let zeros = SageParams::zeros(like.in_dim(), like.hidden());
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, params: &mut SageParams, grads: &SageParams) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: SageParams,
    /// `loss_trace[e]` is the loss after `e` updates (`epochs + 1` entries).
    pub loss_trace: Vec<f64>,
}

/// Full-batch training on the labelled nodes.
pub fn train(
    x: &Array2<f64>,
    g: &UnitigGraph,
    training: &[(usize, usize)],
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some(&(i, t)) = training.iter().find(|&&(i, t)| i >= x.nrows() || t >= N_CLASSES) {
        return Err(Error::Shape(format!("training entry ({i}, {t}) out of range")));
    }
    let agg = MeanAggregator::new(g);
    let mut params = SageParams::glorot(x.ncols(), cfg.hidden, cfg.seed);
    let mut adam = Adam::new(cfg.lr, &params);
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let fp = forward_with(x, &agg, &params)?;
        let (l, dlogits) = loss_and_grad(&fp.logits, training)?;
        trace.push(l);
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, trace });
        }
        if epoch == cfg.epochs {
            break;
        }
        let grads = backward(x, &agg, &params, &fp, &dlogits);
        adam.step(&mut params, &grads);
    }
    Ok(TrainOutput {
        params,
        loss_trace: trace,
    })
}

/// Class with the larger logit; ties go to class 0.
pub fn argmax_labels(logits: &Array2<f64>) -> Vec<u8> {
    logits
        .rows()
        .into_iter()
        .map(|r| u8::from(r[1] > r[0]))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the perturbation crossed a ReLU kink.
    pub skipped_kinks: usize,
}

/// Finite-difference step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient against central differences on every parameter.
/// Relative error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check(
    x: &Array2<f64>,
    g: &UnitigGraph,
    params: &SageParams,
    training: &[(usize, usize)],
) -> Result<GradCheckReport> {
    let agg = MeanAggregator::new(g);
    let fp = forward_with(x, &agg, params)?;
    let (_, dlogits) = loss_and_grad(&fp.logits, training)?;
    let analytic = backward(x, &agg, params, &fp, &dlogits);
    let base_pattern = fp.relu_pattern();

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for t in 0..8 {
        let len = params.tensors()[t].len();
        for idx in 0..len {
            let orig = params.tensors()[t].as_slice().expect("standard layout")[idx];
            let mut eval = |value: f64| -> Result<(f64, bool)> {
                work.tensors_mut()[t].as_slice_mut().expect("standard layout")[idx] = value;
                let fp = forward_with(x, &agg, &work)?;
                let same = fp.relu_pattern() == base_pattern;
                Ok((loss(&fp.logits, training)?, same))
            };
            let (plus, same_p) = eval(orig + GRAD_CHECK_STEP)?;
            let (minus, same_m) = eval(orig - GRAD_CHECK_STEP)?;
            work.tensors_mut()[t].as_slice_mut().expect("standard layout")[idx] = orig;
            if !(same_p && same_m) {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
            let a = analytic.tensors()[t].as_slice().expect("standard layout")[idx];
            let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            let rel = (a - numeric).abs() / denom;
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

//! Reverse learning of a suppositional adjacency `A_s` from a frozen GCN by
//! projected gradient descent.
//!
//! Objective, with `p(A_s)` the frozen model's softmax output on `A_s`:
//!
//! `L(A_s) = α·CE(p, ŷ) + (1 − α)·CE(p, y) + β·‖A_s‖_F`
//!
//! where `ŷ` are the model's hard predictions on the original graph, `y`
//! the true labels, and both cross-entropies average over every node.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::adjacency::{mirror_upper, validate_dense_adjacency, DenseNormalization, NormalizedAdjacency, Operator};
use crate::gnn::model::{self, Arch, Propagator};
use crate::gnn::{predict, TrainedModel};
use crate::graph::Graph;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverseConfig {
    pub alpha: f64,
    pub beta: f64,
    pub step_size: f64,
    pub iterations: usize,
}

impl Default for ReverseConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1e-4,
            step_size: 0.1,
            iterations: 200,
        }
    }
}

impl ReverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta {} must be >= 0", self.beta)));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::invalid(format!("step size {} must be > 0", self.step_size)));
        }
        Ok(())
    }
}

/// Dense symmetric `N × N` matrix with entries in `[0, 1]` and a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SuppositionalAdjacency(Array2<f64>);

impl SuppositionalAdjacency {
    pub fn zeros(n: usize) -> Self {
        Self(Array2::zeros((n, n)))
    }

    pub fn from_dense(a: Array2<f64>) -> Result<Self> {
        validate_dense_adjacency(&a)?;
        if a.iter().any(|&v| v > 1.0) {
            return Err(Error::invalid("suppositional adjacency entries must be <= 1"));
        }
        Ok(Self(a))
    }

    pub fn num_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean_entry(&self) -> f64 {
        self.0.mean().unwrap_or(0.0)
    }
}

/// Per-node soft target `α·onehot(ŷ_i) + (1 − α)·onehot(y_i)`.
fn blended_targets<'a>(alpha: f64, y_pred: &'a [usize], y_true: &'a [usize]) -> impl Fn(usize, &mut [f64]) + 'a {
    move |i, t| {
        t[y_pred[i]] += alpha;
        t[y_true[i]] += 1.0 - alpha;
    }
}

/// Reusable `N × N` buffers for repeated loss evaluations.
#[derive(Debug)]
pub struct ReverseWorkspace {
    norm: Option<Array2<f64>>,
    grad: Array2<f64>,
}

impl ReverseWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            norm: Some(Array2::zeros((n, n))),
            grad: Array2::zeros((n, n)),
        }
    }

    /// Gradient written by the last [`reverse_loss_into`] call.
    pub fn gradient(&self) -> &Array2<f64> {
        &self.grad
    }
}

/// Loss and gradient with respect to the upper triangle (returned as a
/// symmetric matrix with zero diagonal).
pub fn reverse_loss(
    a_s: &SuppositionalAdjacency,
    model: &TrainedModel,
    features: &CsrMatrix,
    y_pred: &[usize],
    y_true: &[usize],
    alpha: f64,
    beta: f64,
) -> Result<(f64, Array2<f64>)> {
    let mut ws = ReverseWorkspace::new(a_s.num_nodes());
    let loss = reverse_loss_into(a_s, model, features, y_pred, y_true, alpha, beta, &mut ws)?;
    Ok((loss, ws.grad))
}

#[allow(clippy::too_many_arguments)]
pub fn reverse_loss_into(
    a_s: &SuppositionalAdjacency,
    model: &TrainedModel,
    features: &CsrMatrix,
    y_pred: &[usize],
    y_true: &[usize],
    alpha: f64,
    beta: f64,
    ws: &mut ReverseWorkspace,
) -> Result<f64> {
    if model.arch != Arch::Gcn {
        return Err(Error::invalid("reverse learning requires a GCN model"));
    }
    let n = a_s.num_nodes();
    for (context, len) in [
        ("predicted labels", y_pred.len()),
        ("true labels", y_true.len()),
        ("workspace size", ws.grad.nrows()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                actual: len,
            });
        }
    }
    let a = a_s.matrix();
    let buffer = ws.norm.take().unwrap_or_else(|| Array2::zeros((n, n)));
    let (norm, cache) = DenseNormalization::forward_into(a, buffer);
    let prop = Propagator::Gcn(norm);
    let weights = &model.weights;
    let fwd = model::forward(&prop, weights, features);
    let Propagator::Gcn(NormalizedAdjacency(Operator::Dense(buffer))) = prop else {
        unreachable!("dense normalization")
    };
    let norm = NormalizedAdjacency(Operator::Dense(buffer));
    let result = (|| {
        let fwd = fwd?;
        let nodes: Vec<usize> = (0..n).collect();
        let (ce, d_logits) = model::cross_entropy(&fwd.logits, &nodes, blended_targets(alpha, y_pred, y_true));

        // logits = Â·(H W2), pre1 = Â·(X W1)
        let d_hw = norm.propagate(&d_logits.view());
        let mut d_pre1 = d_hw.dot(&weights.w2.t());
        Zip::from(&mut d_pre1).and(&fwd.pre1).for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        // ∂L/∂Â = L·Rᵀ with L = [dlogits | dpre1], R = [HW | XW], so
        // ∂L/∂Â + (∂L/∂Â)ᵀ = [L | R]·[R | L]ᵀ.
        let lr = concatenate(Axis(1), &[d_logits.view(), d_pre1.view(), fwd.hw.view(), fwd.xw.view()])
            .expect("row counts match");
        let rl = concatenate(Axis(1), &[fwd.hw.view(), fwd.xw.view(), d_logits.view(), d_pre1.view()])
            .expect("row counts match");
        general_mat_mul(1.0, &lr, &rl.t(), 0.0, &mut ws.grad);
        cache.backward_from_symmetrized(a, &mut ws.grad);
        Ok(ce)
    })();
    let NormalizedAdjacency(Operator::Dense(buffer)) = norm else { unreachable!() };
    ws.norm = Some(buffer);
    let ce = result?;

    let fro = a_s.frobenius_norm();
    if fro > 0.0 && beta > 0.0 {
        // u_kl appears twice in ‖A‖_F.
        ws.grad.scaled_add(2.0 * beta / fro, a);
    }
    let loss = ce + beta * fro;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            stage: "reverse_loss",
            iteration: 0,
        });
    }
    Ok(loss)
}

/// Projection onto `[0, 1]`.
pub fn project_unit(x: f64) -> f64 {
    if x > 1.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        x
    }
}

/// `A_s ← P(A_s − η·g)` on the strict upper triangle, mirrored below.
pub fn pgd_step(a_s: &mut SuppositionalAdjacency, gradient: &Array2<f64>, step_size: f64) -> Result<()> {
    let n = a_s.num_nodes();
    if gradient.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "gradient shape",
            expected: n,
            actual: gradient.nrows(),
        });
    }
    let a = &mut a_s.0;
    for (i, (mut row, g)) in a.rows_mut().into_iter().zip(gradient.rows()).enumerate() {
        row[i] = 0.0;
        Zip::from(row.slice_mut(s![i + 1..]))
            .and(g.slice(s![i + 1..]))
            .for_each(|x, &gij| *x = project_unit(*x - step_size * gij));
    }
    mirror_upper(a);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReverseOutcome {
    pub adjacency: SuppositionalAdjacency,
    /// Loss of iterate `t` for `t = 0..=T`.
    pub trace: Vec<f64>,
    pub best_iteration: usize,
}

/// Runs `T` PGD steps from `A_s = 0` and keeps the lowest-loss iterate.
pub fn learn_suppositional_adjacency(
    model: &TrainedModel,
    graph: &Graph,
    config: &ReverseConfig,
) -> Result<ReverseOutcome> {
    config.validate()?;
    let y_pred = predict(model, graph.structure(), graph.features())?.labels;
    learn_from_targets(model, graph.features(), &y_pred, graph.labels(), config)
}

pub fn learn_from_targets(
    model: &TrainedModel,
    features: &CsrMatrix,
    y_pred: &[usize],
    y_true: &[usize],
    config: &ReverseConfig,
) -> Result<ReverseOutcome> {
    config.validate()?;
    let n = features.rows();
    let mut current = SuppositionalAdjacency::zeros(n);
    let mut best = current.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_iteration = 0;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut ws = ReverseWorkspace::new(n);
    for t in 0..=config.iterations {
        let loss = reverse_loss_into(&current, model, features, y_pred, y_true, config.alpha, config.beta, &mut ws)
            .map_err(|e| match e {
                Error::NonFinite { stage, .. } => Error::NonFinite { stage, iteration: t },
                other => other,
            })?;
        trace.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.0.assign(&current.0);
            best_iteration = t;
        }
        if t < config.iterations {
            pgd_step(&mut current, &ws.grad, config.step_size)?;
        }
    }
    log::debug!(
        "reverse learning: loss {:.5} -> best {:.5} at iteration {best_iteration}, mean entry {:.3e}",
        trace[0],
        best_loss,
        best.mean_entry()
    );
    Ok(ReverseOutcome {
        adjacency: best,
        trace,
        best_iteration,
    })
}

const MATRIX_MAGIC: &[u8; 4] = b"GPAS";

/// Binary dump: magic `GPAS`, `u32` version (1), `u64` node count, then the
/// strict upper triangle row by row as little-endian `f64`.
pub fn write_matrix(a_s: &SuppositionalAdjacency, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = a_s.num_nodes();
    let mut buf = Vec::with_capacity(16 + n * n.saturating_sub(1) * 4);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in (i + 1)..n {
            buf.extend_from_slice(&a_s.0[[i, j]].to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SuppositionalAdjacency> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::invalid(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..4] != MATRIX_MAGIC {
        return Err(bad("not a suppositional adjacency dump"));
    }
    if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != 1 {
        return Err(bad("unsupported version"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = 16 + n * n.saturating_sub(1) / 2 * 8;
    if bytes.len() != expected {
        return Err(bad("truncated"));
    }
    let mut a = Array2::zeros((n, n));
    let mut values = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = values.next().unwrap();
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    SuppositionalAdjacency::from_dense(a)
}

pub fn write_trace(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iteration,loss\n");
    for (t, loss) in trace.iter().enumerate() {
        writeln!(out, "{t},{loss}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

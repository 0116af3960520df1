//! Two-layer GCN and GraphSAGE (mean aggregator, self-concatenation) with
//! hand-written forward and backward passes.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::adjacency::{MeanAggregator, NormalizedAdjacency, Operator, Structure};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Sage,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Arch::Gcn),
            "sage" => Ok(Arch::Sage),
            other => Err(Error::invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture-specific propagation operator.
#[derive(Debug, Clone)]
pub enum Propagator {
    Gcn(NormalizedAdjacency),
    Sage(MeanAggregator),
}

impl Propagator {
    pub fn build(arch: Arch, structure: Structure<'_>) -> Result<Self> {
        Ok(match (arch, structure) {
            (Arch::Gcn, s) => Propagator::Gcn(super::adjacency::normalize_adjacency(s)?),
            (Arch::Sage, Structure::Edges { num_nodes, edges }) => {
                Propagator::Sage(MeanAggregator::from_edges(num_nodes, edges))
            }
            (Arch::Sage, Structure::Dense(a)) => Propagator::Sage(MeanAggregator::from_dense(a)?),
        })
    }

    pub fn arch(&self) -> Arch {
        match self {
            Propagator::Gcn(_) => Arch::Gcn,
            Propagator::Sage(_) => Arch::Sage,
        }
    }

    fn operator(&self) -> &Operator {
        match self {
            Propagator::Gcn(a) => &a.0,
            Propagator::Sage(m) => &m.0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.operator().size()
    }
}

/// `W1` and `W2`. For GraphSAGE each matrix stacks the self weights on top
/// of the neighbor weights, so `W1` is `2F × H` and `W2` is `2H × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl Weights {
    pub fn shapes(arch: Arch, features: usize, hidden: usize, classes: usize) -> [(usize, usize); 2] {
        let k = match arch {
            Arch::Gcn => 1,
            Arch::Sage => 2,
        };
        [(k * features, hidden), (k * hidden, classes)]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.w1.iter().chain(self.w2.iter()).map(|w| w * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|w| w.is_finite())
    }
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// GCN: `X W1`. SAGE: `X W1_self`.
    pub xw: Array2<f64>,
    /// SAGE only: `X W1_neigh`.
    pub xw_neigh: Option<Array2<f64>>,
    pub pre1: Array2<f64>,
    /// First-layer output after ReLU; the node embeddings.
    pub hidden: Array2<f64>,
    /// GCN: `H W2`. SAGE: `H W2_self`.
    pub hw: Array2<f64>,
    pub hw_neigh: Option<Array2<f64>>,
    pub logits: Array2<f64>,
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn check_dims(prop: &Propagator, weights: &Weights, features: &CsrMatrix) -> Result<()> {
    if prop.num_nodes() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "adjacency vs feature rows",
            expected: features.rows(),
            actual: prop.num_nodes(),
        });
    }
    let k = match prop.arch() {
        Arch::Gcn => 1,
        Arch::Sage => 2,
    };
    if weights.w1.nrows() != k * features.cols() {
        return Err(Error::DimensionMismatch {
            context: "feature dimension",
            expected: weights.w1.nrows() / k,
            actual: features.cols(),
        });
    }
    if weights.w2.nrows() != k * weights.w1.ncols() {
        return Err(Error::DimensionMismatch {
            context: "hidden dimension",
            expected: weights.w2.nrows() / k,
            actual: weights.w1.ncols(),
        });
    }
    Ok(())
}

pub fn forward(prop: &Propagator, weights: &Weights, features: &CsrMatrix) -> Result<Forward> {
    check_dims(prop, weights, features)?;
    Ok(match prop {
        Propagator::Gcn(adj) => {
            let xw = features.dot_dense(&weights.w1.view());
            let pre1 = adj.propagate(&xw.view());
            let hidden = relu(&pre1);
            let hw = hidden.dot(&weights.w2);
            let logits = adj.propagate(&hw.view());
            Forward {
                xw,
                xw_neigh: None,
                pre1,
                hidden,
                hw,
                hw_neigh: None,
                logits,
            }
        }
        Propagator::Sage(agg) => {
            let f = features.cols();
            let h = weights.w1.ncols();
            let xw = features.dot_dense(&weights.w1.slice(s![..f, ..]));
            let xw_neigh = features.dot_dense(&weights.w1.slice(s![f.., ..]));
            let pre1 = &xw + &agg.0.apply(&xw_neigh.view());
            let hidden = relu(&pre1);
            let hw = hidden.dot(&weights.w2.slice(s![..h, ..]));
            let hw_neigh = hidden.dot(&weights.w2.slice(s![h.., ..]));
            let logits = &hw + &agg.0.apply(&hw_neigh.view());
            Forward {
                xw,
                xw_neigh: Some(xw_neigh),
                pre1,
                hidden,
                hw,
                hw_neigh: Some(hw_neigh),
                logits,
            }
        }
    })
}

/// Gradients of a scalar loss given `d_logits = ∂L/∂logits`.
#[derive(Debug, Clone)]
pub struct Backward {
    pub weights: Weights,
    /// `∂L/∂pre1`, needed to differentiate through the propagation operator.
    pub d_pre1: Array2<f64>,
}

pub fn backward(
    prop: &Propagator,
    weights: &Weights,
    features: &CsrMatrix,
    fwd: &Forward,
    d_logits: &Array2<f64>,
) -> Backward {
    let mask_relu = |d_hidden: Array2<f64>| {
        let mut d = d_hidden;
        Zip::from(&mut d).and(&fwd.pre1).for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        d
    };
    match prop {
        Propagator::Gcn(adj) => {
            // Â is symmetric, so Âᵀ = Â.
            let d_hw = adj.propagate(&d_logits.view());
            let d_w2 = fwd.hidden.t().dot(&d_hw);
            let d_pre1 = mask_relu(d_hw.dot(&weights.w2.t()));
            let d_xw = adj.propagate(&d_pre1.view());
            let d_w1 = features.transpose_dot_dense(&d_xw.view());
            Backward {
                weights: Weights { w1: d_w1, w2: d_w2 },
                d_pre1,
            }
        }
        Propagator::Sage(agg) => {
            let h = weights.w1.ncols();
            let m = &agg.0;
            let d_w2_self = fwd.hidden.t().dot(d_logits);
            let d_hw_neigh = m.apply_transpose(&d_logits.view());
            let d_w2_neigh = fwd.hidden.t().dot(&d_hw_neigh);
            let d_hidden = d_logits.dot(&weights.w2.slice(s![..h, ..]).t())
                + d_hw_neigh.dot(&weights.w2.slice(s![h.., ..]).t());
            let d_pre1 = mask_relu(d_hidden);
            let d_w1_self = features.transpose_dot_dense(&d_pre1.view());
            let d_xw_neigh = m.apply_transpose(&d_pre1.view());
            let d_w1_neigh = features.transpose_dot_dense(&d_xw_neigh.view());
            let w1 = ndarray::concatenate(Axis(0), &[d_w1_self.view(), d_w1_neigh.view()])
                .expect("matching widths");
            let w2 = ndarray::concatenate(Axis(0), &[d_w2_self.view(), d_w2_neigh.view()])
                .expect("matching widths");
            Backward {
                weights: Weights { w1, w2 },
                d_pre1,
            }
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `nodes` against per-node target distributions,
/// returning `(loss, ∂loss/∂logits)`. Rows outside `nodes` get zero gradient.
pub fn cross_entropy<T>(logits: &Array2<f64>, nodes: &[usize], target: T) -> (f64, Array2<f64>)
where
    T: Fn(usize, &mut [f64]),
{
    let classes = logits.ncols();
    let mut grad = Array2::zeros(logits.raw_dim());
    if nodes.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / nodes.len() as f64;
    let mut t = vec![0.0; classes];
    let mut loss = 0.0;
    for &i in nodes {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        t.iter_mut().for_each(|x| *x = 0.0);
        target(i, &mut t);
        let mut g = grad.row_mut(i);
        for c in 0..classes {
            let log_p = row[c] - log_z;
            loss -= t[c] * log_p;
            g[c] = (log_p.exp() - t[c]) * scale;
        }
    }
    (loss * scale, grad)
}

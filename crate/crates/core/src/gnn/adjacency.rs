//! Propagation operators: the symmetric GCN normalization
//! `Â = D^{-1/2}(A + I)D^{-1/2}` and the GraphSAGE mean aggregator `D^{-1}A`.

use ndarray::{s, Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::sparse::CsrMatrix;

/// Graph structure handed to a model: either a binary edge list or a dense
/// fractional adjacency.
#[derive(Debug, Clone, Copy)]
pub enum Structure<'a> {
    Edges { num_nodes: usize, edges: &'a [Edge] },
    Dense(&'a Array2<f64>),
}

impl Structure<'_> {
    pub fn num_nodes(&self) -> usize {
        match self {
            Structure::Edges { num_nodes, .. } => *num_nodes,
            Structure::Dense(a) => a.nrows(),
        }
    }
}

/// A linear operator over node rows.
#[derive(Debug, Clone)]
pub enum Operator {
    Sparse(CsrMatrix),
    Dense(Array2<f64>),
}

impl Operator {
    pub fn size(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.rows(),
            Operator::Dense(m) => m.nrows(),
        }
    }

    pub fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        match self {
            Operator::Sparse(m) => m.dot_dense(x),
            Operator::Dense(m) => m.dot(x),
        }
    }

    pub fn apply_transpose(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        match self {
            Operator::Sparse(m) => m.transpose_dot_dense(x),
            Operator::Dense(m) => m.t().dot(x),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Operator::Sparse(m) => m.to_dense(),
            Operator::Dense(m) => m.clone(),
        }
    }
}

/// `Â = D^{-1/2}(A + I)D^{-1/2}` with `D = rowsum(A + I)`. Sparse for a
/// binary edge list, dense for a fractional adjacency.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency(pub Operator);

impl NormalizedAdjacency {
    pub fn from_edges(num_nodes: usize, edges: &[Edge]) -> Self {
        let mut degree = vec![1.0f64; num_nodes];
        for &(a, b) in edges {
            degree[a] += 1.0;
            degree[b] += 1.0;
        }
        let s: Vec<f64> = degree.iter().map(|d| d.powf(-0.5)).collect();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..num_nodes).map(|i| vec![(i, s[i] * s[i])]).collect();
        for &(a, b) in edges {
            let w = s[a] * s[b];
            rows[a].push((b, w));
            rows[b].push((a, w));
        }
        let csr = CsrMatrix::from_rows(num_nodes, rows).expect("edge endpoints in range");
        NormalizedAdjacency(Operator::Sparse(csr))
    }

    pub fn from_dense(a: &Array2<f64>) -> Result<Self> {
        Ok(DenseNormalization::forward(a)?.0)
    }

    pub fn propagate(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        self.0.apply(x)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.0.to_dense()
    }
}

pub fn normalize_adjacency(structure: Structure<'_>) -> Result<NormalizedAdjacency> {
    match structure {
        Structure::Edges { num_nodes, edges } => Ok(NormalizedAdjacency::from_edges(num_nodes, edges)),
        Structure::Dense(a) => NormalizedAdjacency::from_dense(a),
    }
}

/// Checks that `a` is square, symmetric, finite, non-negative with a zero diagonal.
pub fn validate_dense_adjacency(a: &Array2<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "square adjacency",
            expected: n,
            actual: a.ncols(),
        });
    }
    for i in 0..n {
        if a[[i, i]] != 0.0 {
            return Err(Error::invalid(format!("nonzero diagonal entry at node {i}")));
        }
        for j in (i + 1)..n {
            let (x, y) = (a[[i, j]], a[[j, i]]);
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::invalid(format!("non-finite adjacency entry ({i}, {j})")));
            }
            if x < 0.0 || y < 0.0 {
                return Err(Error::invalid(format!("negative adjacency entry ({i}, {j})")));
            }
            if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::invalid(format!("asymmetric adjacency at ({i}, {j}): {x} vs {y}")));
            }
        }
    }
    Ok(())
}

/// Dense normalization that keeps what the backward pass needs.
#[derive(Debug, Clone)]
pub struct DenseNormalization {
    /// `d_i^{-1/2}` with `d_i = 1 + Σ_j A_ij`.
    pub inv_sqrt_degree: Array1<f64>,
}

impl DenseNormalization {
    pub fn forward(a: &Array2<f64>) -> Result<(NormalizedAdjacency, Self)> {
        validate_dense_adjacency(a)?;
        Ok(Self::forward_unchecked(a))
    }

    /// Skips validation; the caller guarantees a symmetric non-negative input.
    pub fn forward_unchecked(a: &Array2<f64>) -> (NormalizedAdjacency, Self) {
        Self::forward_into(a, Array2::zeros(a.dim()))
    }

    /// As [`Self::forward_unchecked`], writing `Â` into `buffer` (which must
    /// have the shape of `a`) instead of allocating.
    pub fn forward_into(a: &Array2<f64>, mut buffer: Array2<f64>) -> (NormalizedAdjacency, Self) {
        assert_eq!(buffer.dim(), a.dim(), "normalization buffer shape");
        let s: Array1<f64> = a
            .rows()
            .into_iter()
            .map(|row| (1.0 + row.sum()).powf(-0.5))
            .collect();
        for (i, (mut out, row)) in buffer.rows_mut().into_iter().zip(a.rows()).enumerate() {
            let si = s[i];
            Zip::from(&mut out).and(row).and(&s).for_each(|o, &aij, &sj| *o = si * aij * sj);
            out[i] += si * si;
        }
        (
            NormalizedAdjacency(Operator::Dense(buffer)),
            Self { inv_sqrt_degree: s },
        )
    }

    /// Gradient with respect to the symmetric parameterization: given
    /// `upstream = ∂L/∂Â`, returns a symmetric matrix whose `(k, l)` entry
    /// (`k ≠ l`) is `∂L/∂u_kl` where `A_kl = A_lk = u_kl`. The diagonal is zero.
    ///
    /// With `s = d^{-1/2}` and `G = upstream`:
    /// `∂L/∂u_kl = (G_kl + G_lk) s_k s_l + c_k + c_l`,
    /// `c_k = -½ s_k³ Σ_j (G_kj + G_jk) Ã_kj s_j`.
    pub fn backward_symmetric(&self, a: &Array2<f64>, upstream: &Array2<f64>) -> Array2<f64> {
        let mut grad = upstream + &upstream.t();
        self.backward_from_symmetrized(a, &mut grad);
        grad
    }

    /// In-place variant taking `G + Gᵀ` rather than `G`.
    pub fn backward_from_symmetrized(&self, a: &Array2<f64>, gsym: &mut Array2<f64>) {
        let n = a.nrows();
        let s = &self.inv_sqrt_degree;
        let mut c = Array1::<f64>::zeros(n);
        for (k, (g_row, a_row)) in gsym.rows().into_iter().zip(a.rows()).enumerate() {
            let mut acc = 0.0;
            Zip::from(g_row).and(a_row).and(s).for_each(|&g, &x, &sj| acc += g * x * sj);
            acc += g_row[k] * s[k];
            c[k] = -0.5 * s[k].powi(3) * acc;
        }
        for (k, mut row) in gsym.rows_mut().into_iter().enumerate() {
            let (sk, ck) = (s[k], c[k]);
            Zip::from(row.slice_mut(s![k + 1..]))
                .and(s.slice(s![k + 1..]))
                .and(c.slice(s![k + 1..]))
                .for_each(|g, &sl, &cl| *g = *g * sk * sl + ck + cl);
            row[k] = 0.0;
        }
        mirror_upper(gsym);
    }
}

/// Copies the strict upper triangle onto the lower one, tile by tile.
pub(crate) fn mirror_upper(a: &mut Array2<f64>) {
    const TILE: usize = 64;
    let n = a.nrows();
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                for j in bj.max(i + 1)..(bj + TILE).min(n) {
                    a[[j, i]] = a[[i, j]];
                }
            }
        }
    }
}

/// GraphSAGE mean aggregator `D^{-1}A`; a node with no neighbors aggregates to zero.
#[derive(Debug, Clone)]
pub struct MeanAggregator(pub Operator);

impl MeanAggregator {
    pub fn from_edges(num_nodes: usize, edges: &[Edge]) -> Self {
        let mut degree = vec![0.0f64; num_nodes];
        for &(a, b) in edges {
            degree[a] += 1.0;
            degree[b] += 1.0;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_nodes];
        for &(a, b) in edges {
            rows[a].push((b, 1.0 / degree[a]));
            rows[b].push((a, 1.0 / degree[b]));
        }
        let csr = CsrMatrix::from_rows(num_nodes, rows).expect("edge endpoints in range");
        MeanAggregator(Operator::Sparse(csr))
    }

    pub fn from_dense(a: &Array2<f64>) -> Result<Self> {
        validate_dense_adjacency(a)?;
        let mut m = a.clone();
        for mut row in m.rows_mut() {
            let total = row.sum();
            if total > 0.0 {
                row /= total;
            }
        }
        Ok(MeanAggregator(Operator::Dense(m)))
    }
}

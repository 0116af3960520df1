//! Privacy mechanisms: randomized response, Laplace noise, degree
//! perturbation, per-node edge budgets and the RR / DPRR / LapGraph
//! baseline publishers.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{degree_vector, DegreeVector, Edge, Graph};
use crate::published::{Method, PublishedGraph};
use crate::rng;
use crate::topk::TopPairs;

/// Total budget `ε` and the share of it (`ε₁ / ε`) spent on degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub degree_share: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, degree_share: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&degree_share) {
            return Err(Error::invalid(format!("degree share must lie in [0, 1), got {degree_share}")));
        }
        Ok(Self {
            epsilon,
            degree_share,
        })
    }

    /// Budget for degree protection; zero disables it.
    pub fn degree_epsilon(&self) -> f64 {
        self.epsilon * self.degree_share
    }

    /// Budget left for the edges.
    pub fn edge_epsilon(&self) -> f64 {
        self.epsilon - self.degree_epsilon()
    }
}

/// Randomized response probabilities `(p, q)`: flip with `p = 1/(1+e^ε)`,
/// keep with `q = e^ε/(1+e^ε)`.
pub fn rr_probs(epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let p = 1.0 / (1.0 + epsilon.exp());
    Ok((p, 1.0 - p))
}

/// Inverse-CDF Laplace sampler with mean 0 and scale `λ = 1/ε`
/// (sensitivity 1).
#[derive(Debug, Clone)]
pub struct LaplaceSampler {
    scale: f64,
    rng: ChaCha8Rng,
}

impl LaplaceSampler {
    pub fn new(scale: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("Laplace scale must be positive, got {scale}")));
        }
        Ok(Self { scale, rng })
    }

    pub fn for_epsilon(epsilon: f64, rng: ChaCha8Rng) -> Result<Self> {
        Self::new(1.0 / epsilon, rng)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `−λ·sgn(u)·ln(1 − 2|u|)` for `u ∈ (−½, ½)`.
    pub fn transform(scale: f64, u: f64) -> f64 {
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    pub fn sample(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random::<f64>() - 0.5;
            if u > -0.5 {
                return Self::transform(self.scale, u);
            }
        }
    }
}

/// Round half away from zero, then clamp to at least 1.
pub fn perturb_degree(degree: usize, noise: f64) -> usize {
    let noisy = (degree as f64 + noise).round();
    if noisy < 1.0 {
        1
    } else {
        noisy as usize
    }
}

/// `m̃_i = max{round(m_i + Lap(1/ε₁)), 1}` for every node.
pub fn perturb_degrees(degrees: &DegreeVector, epsilon1: f64, seed: u64) -> Result<Vec<usize>> {
    if !(epsilon1 > 0.0) {
        return Err(Error::invalid(format!("degree epsilon must be > 0, got {epsilon1}")));
    }
    let mut lap = LaplaceSampler::for_epsilon(epsilon1, rng::stream(seed, "degrees"))?;
    Ok(degrees.0.iter().map(|&m| perturb_degree(m, lap.sample())).collect())
}

/// Per-node split of the published degree into real and fabricated edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeBudget {
    pub node: usize,
    pub m: usize,
    pub m_tilde: usize,
    pub e_real: usize,
    pub e_false: usize,
}

/// Expected real and false counts after randomized response followed by
/// down-sampling to `m̃` edges:
///
/// `E₁ = e^ε·m̃ / (e^ε·m̃ + N − m̃) · m̃`, `E₂ = (N − m̃) / (e^ε·m̃ + N − m̃) · m̃`.
pub fn expected_counts(m_tilde: usize, n: usize, epsilon2: f64) -> (f64, f64) {
    let m = m_tilde as f64;
    let rest = (n as f64 - m) * (-epsilon2).exp();
    let denom = m + rest;
    (m * m / denom, rest * m / denom)
}

/// Integer budget for one node. `E₁` is rounded half away from zero and
/// capped by the real-edge pool `m`; the remainder of `m̃` is false edges,
/// except that when the false pool `N − 1 − m` is too small the excess
/// moves back to real edges.
pub fn edge_budgets(node: usize, m: usize, m_tilde: usize, n: usize, epsilon2: f64) -> Result<EdgeBudget> {
    if m_tilde >= n {
        return Err(Error::InfeasibleBudget {
            node,
            message: format!("perturbed degree {m_tilde} >= node count {n}"),
        });
    }
    if m_tilde == 0 {
        return Err(Error::InfeasibleBudget {
            node,
            message: "perturbed degree must be >= 1".into(),
        });
    }
    if !(epsilon2 > 0.0) {
        return Err(Error::invalid(format!("edge epsilon must be > 0, got {epsilon2}")));
    }
    if m >= n {
        return Err(Error::InfeasibleBudget {
            node,
            message: format!("true degree {m} >= node count {n}"),
        });
    }
    let (e1, _) = expected_counts(m_tilde, n, epsilon2);
    let mut e_real = (e1.round() as usize).min(m_tilde).min(m);
    let false_pool = n - 1 - m;
    if m_tilde - e_real > false_pool {
        e_real = m_tilde - false_pool;
    }
    Ok(EdgeBudget {
        node,
        m,
        m_tilde,
        e_real,
        e_false: m_tilde - e_real,
    })
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    Ok(())
}

fn validate_share(share: f64) -> Result<()> {
    if !(share > 0.0 && share < 1.0) {
        return Err(Error::invalid(format!("degree share must lie in (0, 1), got {share}")));
    }
    Ok(())
}

fn binomial(rng: &mut ChaCha8Rng, trials: usize, p: f64) -> usize {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials as u64, p).expect("valid binomial").sample(rng) as usize
}

/// Randomized response over the strict upper triangle. Per row, the number
/// of flipped 1-cells and 0-cells is drawn from a binomial and the flipped
/// positions are chosen uniformly without replacement.
pub fn randomized_response_edges(graph: &Graph, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Edge>> {
    validate_epsilon(epsilon)?;
    let (p, _) = rr_probs(epsilon)?;
    let n = graph.num_nodes();
    let mut out = Vec::new();
    for i in 0..n {
        let ones: Vec<usize> = graph.neighbors(i).iter().copied().filter(|&j| j > i).collect();
        let cells = n - 1 - i;
        let zeros = cells - ones.len();

        let dropped = binomial(rng, ones.len(), p);
        let mut drop_mask = vec![false; ones.len()];
        if dropped > 0 {
            for k in index::sample(rng, ones.len(), dropped) {
                drop_mask[k] = true;
            }
        }
        let added = binomial(rng, zeros, p);
        let mut ranks: Vec<usize> = if added > 0 {
            index::sample(rng, zeros, added).into_vec()
        } else {
            Vec::new()
        };
        ranks.sort_unstable();

        out.extend(
            ones.iter()
                .zip(&drop_mask)
                .filter(|(_, &d)| !d)
                .map(|(&j, _)| (i, j)),
        );
        // Map the r-th zero cell of the row to its column.
        let base = i + 1;
        let mut ptr = 0;
        for r in ranks {
            while ptr < ones.len() && ones[ptr] <= base + r + ptr {
                ptr += 1;
            }
            out.push((i, base + r + ptr));
        }
    }
    Ok(out)
}

pub fn rr_publish(graph: &Graph, epsilon: f64, seed: u64) -> Result<PublishedGraph> {
    let mut rng = rng::stream(seed, "rr");
    let edges = randomized_response_edges(graph, epsilon, &mut rng)?;
    PublishedGraph::new(graph.num_nodes(), edges, Method::Rr, epsilon, 0.0, seed)
}

/// Output of the DPRR sampling step before it is wrapped up.
#[derive(Debug, Clone)]
pub struct DprrDraw {
    pub published: PublishedGraph,
    pub m_tilde: Vec<usize>,
    /// Per-node number of entries kept by that node's own sampling.
    pub kept_per_row: Vec<usize>,
}

/// Degrees are perturbed with `ε₁ = share·ε`, randomized response runs with
/// `ε₂ = ε − ε₁`, and every node keeps each entry of its noisy row with
/// probability `m̃_i / m′_i`. The published graph is the union of the kept
/// entries.
pub fn dprr_sample(graph: &Graph, epsilon: f64, share: f64, seed: u64) -> Result<DprrDraw> {
    validate_share(share)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let eps1 = share * epsilon;
    let eps2 = epsilon - eps1;
    let n = graph.num_nodes();
    let m_tilde = perturb_degrees(&degree_vector(graph), eps1, rng::derive_seed(seed, "dprr"))?;
    let noisy = randomized_response_edges(graph, eps2, &mut rng::stream(seed, "dprr-rr"))?;
    let rows = crate::graph::adjacency_lists(n, &noisy);
    let mut sampler = rng::stream(seed, "dprr-sample");
    let mut kept = Vec::new();
    let mut kept_per_row = vec![0; n];
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let keep = (m_tilde[i] as f64 / row.len() as f64).min(1.0);
        for &j in row {
            if sampler.random_bool(keep) {
                kept.push((i, j));
                kept_per_row[i] += 1;
            }
        }
    }
    let published = PublishedGraph::new(n, kept, Method::Dprr, epsilon, share, seed)?;
    Ok(DprrDraw {
        published,
        m_tilde,
        kept_per_row,
    })
}

pub fn dprr_publish(graph: &Graph, epsilon: f64, share: f64, seed: u64) -> Result<PublishedGraph> {
    Ok(dprr_sample(graph, epsilon, share, seed)?.published)
}

/// Edge count is released with `ε₁ = share·ε`; every upper-triangle cell
/// receives `Lap(1/ε₂)` noise and the `Ẽ′` largest cells become edges.
pub fn lapgraph_publish(graph: &Graph, epsilon: f64, share: f64, seed: u64) -> Result<PublishedGraph> {
    validate_share(share)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let eps1 = share * epsilon;
    let eps2 = epsilon - eps1;
    let n = graph.num_nodes();
    let cells = n * n.saturating_sub(1) / 2;
    let mut count_noise = LaplaceSampler::for_epsilon(eps1, rng::stream(seed, "lapgraph-count"))?;
    let noisy_count = (graph.num_edges() as f64 + count_noise.sample()).round();
    let target = if noisy_count < 0.0 {
        0
    } else {
        (noisy_count as usize).min(cells)
    };
    let mut cell_noise = LaplaceSampler::for_epsilon(eps2, rng::stream(seed, "lapgraph-cells"))?;

    let mut top = TopPairs::new(target);
    for i in 0..n {
        let nbrs = graph.neighbors(i);
        let mut ptr = nbrs.partition_point(|&j| j <= i);
        for j in (i + 1)..n {
            let truth = if ptr < nbrs.len() && nbrs[ptr] == j {
                ptr += 1;
                1.0
            } else {
                0.0
            };
            top.push(truth + cell_noise.sample(), (i, j));
        }
    }
    let edges: Vec<Edge> = top.into_sorted().into_iter().map(|(_, e)| e).collect();
    PublishedGraph::new(n, edges, Method::LapGraph, epsilon, share, seed)
}

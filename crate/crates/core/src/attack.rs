//! Embedding-similarity link inference and utility metrics.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{extract_embeddings_with, predict_with, train_with_propagator, Arch, Embeddings, Propagator, Structure, TrainConfig};
use crate::graph::{canonical_edges, degree_vector, make_splits, Edge, Graph};
use crate::published::PublishedGraph;
use crate::rng;
use crate::topk::TopPairs;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Guessed pairs, most similar first.
    pub guessed_edges: Vec<Edge>,
    pub conjectured_count: usize,
    pub precision_vs_original: f64,
    pub recall_vs_original: f64,
    pub precision_vs_published: f64,
    pub recall_vs_published: f64,
}

/// On-disk attack summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub epsilon: f64,
    #[serde(rename = "E_tilde")]
    pub e_tilde: usize,
    #[serde(rename = "precision_vs_A")]
    pub precision_vs_a: f64,
    #[serde(rename = "recall_vs_A")]
    pub recall_vs_a: f64,
    pub precision_vs_pub: f64,
    pub recall_vs_pub: f64,
    pub seed: u64,
}

impl AttackReport {
    pub fn new(result: &AttackResult, epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            e_tilde: result.conjectured_count,
            precision_vs_a: result.precision_vs_original,
            recall_vs_a: result.recall_vs_original,
            precision_vs_pub: result.precision_vs_published,
            recall_vs_pub: result.recall_vs_published,
            seed,
        }
    }
}

/// `|G ∩ R| / |G|` and `|G ∩ R| / |R|`; an empty side gives 0.
pub fn precision_recall(guessed: &[Edge], reference: &[Edge]) -> (f64, f64) {
    let canon = |e: &Edge| (e.0.min(e.1), e.0.max(e.1));
    let g: HashSet<Edge> = guessed.iter().map(canon).collect();
    let r: HashSet<Edge> = reference.iter().map(canon).collect();
    let hits = g.intersection(&r).count() as f64;
    let p = if g.is_empty() { 0.0 } else { hits / g.len() as f64 };
    let rc = if r.is_empty() { 0.0 } else { hits / r.len() as f64 };
    (p, rc)
}

/// Cosine of two vectors; 0 if either is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn degree_cosine_similarity(graph: &Graph, published: &PublishedGraph) -> Result<f64> {
    if graph.num_nodes() != published.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "published graph node count",
            expected: graph.num_nodes(),
            actual: published.num_nodes(),
        });
    }
    let to_f = |d: &[usize]| d.iter().map(|&x| x as f64).collect::<Vec<_>>();
    Ok(cosine(
        &to_f(degree_vector(graph).as_slice()),
        &to_f(published.degrees().as_slice()),
    ))
}

/// The `k` most similar unordered pairs by embedding cosine. Nodes with a
/// zero embedding score −1 against everything.
pub fn most_similar_pairs(z: &Embeddings, k: usize) -> Vec<Edge> {
    let n = z.num_nodes();
    let rows: Vec<Option<Vec<f64>>> = z
        .0
        .rows()
        .into_iter()
        .map(|r| {
            let norm = r.dot(&r).sqrt();
            (norm > 0.0).then(|| r.iter().map(|v| v / norm).collect())
        })
        .collect();
    (0..n)
        .into_par_iter()
        .fold(
            || TopPairs::new(k),
            |mut top, i| {
                for j in (i + 1)..n {
                    let s = match (&rows[i], &rows[j]) {
                        (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
                        _ => -1.0,
                    };
                    top.push(s, (i, j));
                }
                top
            },
        )
        .reduce(|| TopPairs::new(k), TopPairs::merge)
        .into_sorted()
        .into_iter()
        .map(|(_, e)| e)
        .collect()
}

/// Trains a GCN on the published structure with the original features and
/// labels, then guesses the `e_tilde` pairs whose first-layer embeddings
/// are most similar.
pub fn embedding_similarity_attack(
    published: &PublishedGraph,
    graph: &Graph,
    e_tilde: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<AttackResult> {
    if e_tilde == 0 {
        return Err(Error::invalid("conjectured edge count must be >= 1"));
    }
    if published.num_nodes() != graph.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "published graph node count",
            expected: graph.num_nodes(),
            actual: published.num_nodes(),
        });
    }
    let n = graph.num_nodes();
    let max_pairs = n * n.saturating_sub(1) / 2;
    if e_tilde > max_pairs {
        return Err(Error::invalid(format!("conjectured edge count {e_tilde} exceeds {max_pairs} pairs")));
    }
    let prop = Propagator::build(
        Arch::Gcn,
        Structure::Edges {
            num_nodes: n,
            edges: published.edges(),
        },
    )?;
    let splits = make_splits(graph, seed);
    let model = train_with_propagator(
        &prop,
        graph.features(),
        graph.labels(),
        &splits,
        graph.num_classes(),
        &config.with_seed(rng::derive_seed(seed, "attack")),
    )?;
    let z = extract_embeddings_with(&model, &prop, graph.features())?;
    let guessed = most_similar_pairs(&z, e_tilde);
    let (po, ro) = precision_recall(&guessed, graph.edges());
    let (pp, rp) = precision_recall(&guessed, published.edges());
    Ok(AttackResult {
        conjectured_count: guessed.len(),
        guessed_edges: guessed,
        precision_vs_original: po,
        recall_vs_original: ro,
        precision_vs_published: pp,
        recall_vs_published: rp,
    })
}

/// Same attack, run against the unprotected graph as a reference point.
pub fn attack_original(graph: &Graph, e_tilde: usize, config: &TrainConfig, seed: u64) -> Result<AttackResult> {
    let edges = canonical_edges(graph.num_nodes(), graph.edges().iter().copied())?;
    let as_published = PublishedGraph::new(
        graph.num_nodes(),
        edges,
        crate::published::Method::Rr,
        f64::INFINITY,
        0.0,
        seed,
    )?;
    embedding_similarity_attack(&as_published, graph, e_tilde, config, seed)
}

/// Test accuracy of a freshly trained `arch` model on `edges` with the
/// original features, labels and the seed's split.
pub fn retrain_accuracy(
    graph: &Graph,
    edges: &[Edge],
    arch: Arch,
    config: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let n = graph.num_nodes();
    let prop = Propagator::build(arch, Structure::Edges { num_nodes: n, edges })?;
    let splits = make_splits(graph, seed);
    let model = train_with_propagator(
        &prop,
        graph.features(),
        graph.labels(),
        &splits,
        graph.num_classes(),
        &config.with_seed(rng::derive_seed(seed, "eval")),
    )?;
    let pred = predict_with(&model, &prop, graph.features())?;
    Ok(pred.accuracy(graph.labels(), &splits.test))
}

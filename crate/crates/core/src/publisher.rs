//! End-to-end GraphPub pipeline: reverse learning, encoder scoring, per-node
//! budgeted top-k selection and union symmetrization.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{edge_budgets, perturb_degrees, EdgeBudget, PrivacyBudget};
use crate::encoder::{logit_row_into, train_encoder, train_encoder_on};
use crate::error::{Error, Result};
use crate::gnn::{train_model, Arch, Embeddings, TrainConfig};
use crate::graph::{degree_vector, make_splits, Edge, Graph, SplitMask};
use crate::published::{Method, PublishedGraph};
use crate::reverse::{learn_suppositional_adjacency, ReverseConfig, SuppositionalAdjacency};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    /// Skip reverse learning; the encoder sees the original graph.
    NoPgd,
    /// Replace the decoder scores with symmetric uniform noise.
    RandomMatrix,
}

impl Mode {
    pub fn method(self) -> Method {
        match self {
            Mode::Full => Method::GraphPub,
            Mode::NoPgd => Method::AblationNoPgd,
            Mode::RandomMatrix => Method::AblationRandomMatrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphPubConfig {
    pub train: TrainConfig,
    pub reverse: ReverseConfig,
    /// Architecture of the encoder that produces the probability matrix.
    pub builder: Arch,
    pub mode: Mode,
}

impl Default for GraphPubConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            reverse: ReverseConfig::default(),
            builder: Arch::Gcn,
            mode: Mode::Full,
        }
    }
}

/// Pair scores used for ranking. Embedding scores are the decoder logits
/// `⟨Z_i, Z_j⟩`, which order pairs exactly like `σ(⟨Z_i, Z_j⟩)` without
/// saturating.
#[derive(Debug, Clone)]
pub enum EdgeScores {
    Embeddings(Embeddings),
    Random { seed: u64, num_nodes: usize },
}

impl EdgeScores {
    pub fn num_nodes(&self) -> usize {
        match self {
            EdgeScores::Embeddings(z) => z.num_nodes(),
            EdgeScores::Random { num_nodes, .. } => *num_nodes,
        }
    }

    pub fn row_into(&self, i: usize, out: &mut [f64]) -> Result<()> {
        match self {
            EdgeScores::Embeddings(z) => logit_row_into(z, i, out),
            EdgeScores::Random { seed, num_nodes } => {
                if i >= *num_nodes {
                    return Err(Error::NodeOutOfRange {
                        index: i,
                        num_nodes: *num_nodes,
                    });
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o = rng::hash_uniform(*seed, i.min(j) as u64, i.max(j) as u64);
                }
                Ok(())
            }
        }
    }
}

/// The ε-independent part of the pipeline (stages 1 to 3).
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mode: Mode,
    pub seed: u64,
    pub splits: SplitMask,
    pub scores: EdgeScores,
    pub adjacency: Option<SuppositionalAdjacency>,
    pub reverse_trace: Vec<f64>,
    pub stage_ms: BTreeMap<String, u64>,
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

/// Stages 1 to 3: train the target model, reverse-learn `A_s`, train the
/// encoder on it. Only depends on the seed, so several budgets can share it.
pub fn prepare(graph: &Graph, config: &GraphPubConfig, seed: u64) -> Result<Prepared> {
    config.train.validate()?;
    config.reverse.validate()?;
    let splits = make_splits(graph, seed);
    let mut stage_ms = BTreeMap::new();
    let mut adjacency = None;
    let mut reverse_trace = Vec::new();

    let scores = match config.mode {
        Mode::RandomMatrix => EdgeScores::Random {
            seed: rng::derive_seed(seed, "random-matrix"),
            num_nodes: graph.num_nodes(),
        },
        Mode::NoPgd => {
            let t = Instant::now();
            let train = config.train.with_seed(rng::derive_seed(seed, "encoder"));
            let enc = train_encoder_on(graph.structure(), graph, &splits, config.builder, &train)?;
            stage_ms.insert("encoder".into(), elapsed_ms(t));
            EdgeScores::Embeddings(enc.embeddings)
        }
        Mode::Full => {
            let t = Instant::now();
            let target = train_model(
                graph.structure(),
                graph.features(),
                graph.labels(),
                &splits,
                graph.num_classes(),
                Arch::Gcn,
                &config.train.with_seed(rng::derive_seed(seed, "target-model")),
            )?;
            stage_ms.insert("train_model".into(), elapsed_ms(t));
            log::info!(
                "target model trained in {} ms (val acc {:.4})",
                stage_ms["train_model"],
                target.log.best_val_accuracy()
            );

            let t = Instant::now();
            let outcome = learn_suppositional_adjacency(&target, graph, &config.reverse)?;
            stage_ms.insert("reverse".into(), elapsed_ms(t));
            log::info!(
                "reverse learning took {} ms, best iteration {}",
                stage_ms["reverse"],
                outcome.best_iteration
            );

            let t = Instant::now();
            let train = config.train.with_seed(rng::derive_seed(seed, "encoder"));
            let enc = train_encoder(&outcome.adjacency, graph, &splits, config.builder, &train)?;
            stage_ms.insert("encoder".into(), elapsed_ms(t));
            reverse_trace = outcome.trace;
            adjacency = Some(outcome.adjacency);
            EdgeScores::Embeddings(enc.embeddings)
        }
    };
    Ok(Prepared {
        mode: config.mode,
        seed,
        splits,
        scores,
        adjacency,
        reverse_trace,
        stage_ms,
    })
}

/// Orders candidates by descending score, then ascending index.
fn rank(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn top_k(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, rank);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank);
    candidates.into_iter().map(|(_, j)| j).collect()
}

/// Picks the `e_real` highest-scoring true neighbors and the `e_false`
/// highest-scoring non-neighbors of node `i`. `real_neighbors` must be
/// sorted. Ties go to the smaller index.
pub fn select_edges_for_node(
    i: usize,
    scores: &[f64],
    real_neighbors: &[usize],
    budget: &EdgeBudget,
) -> Result<Vec<usize>> {
    let n = scores.len();
    if i >= n {
        return Err(Error::NodeOutOfRange { index: i, num_nodes: n });
    }
    if budget.e_real > real_neighbors.len() {
        return Err(Error::InfeasibleBudget {
            node: i,
            message: format!("{} real edges requested, {} available", budget.e_real, real_neighbors.len()),
        });
    }
    let false_pool = n - 1 - real_neighbors.len();
    if budget.e_false > false_pool {
        return Err(Error::InfeasibleBudget {
            node: i,
            message: format!("{} false edges requested, {false_pool} available", budget.e_false),
        });
    }
    let mut real = Vec::with_capacity(real_neighbors.len());
    let mut fake = Vec::with_capacity(false_pool);
    let mut ptr = 0;
    for (j, &s) in scores.iter().enumerate() {
        if ptr < real_neighbors.len() && real_neighbors[ptr] == j {
            real.push((s, j));
            ptr += 1;
        } else if j != i {
            fake.push((s, j));
        }
    }
    if ptr != real_neighbors.len() {
        return Err(Error::invalid(format!("neighbor list of node {i} is unsorted or out of range")));
    }
    let mut picked = top_k(real, budget.e_real);
    picked.extend(top_k(fake, budget.e_false));
    Ok(picked)
}

/// Publication output together with the per-node accounting behind it.
#[derive(Debug, Clone)]
pub struct Publication {
    pub published: PublishedGraph,
    pub budgets: Vec<EdgeBudget>,
    /// Number of edges each node selected before symmetrization.
    pub directed_degrees: Vec<usize>,
}

/// Stage 4 and 5: per-node budgets from (optionally perturbed) degrees.
pub fn compute_budgets(graph: &Graph, budget: &PrivacyBudget, seed: u64) -> Result<Vec<EdgeBudget>> {
    let n = graph.num_nodes();
    let degrees = degree_vector(graph);
    let m_tilde = if budget.degree_share > 0.0 {
        perturb_degrees(&degrees, budget.degree_epsilon(), rng::derive_seed(seed, "graphpub-degrees"))?
    } else {
        degrees.0.clone()
    };
    let eps2 = budget.edge_epsilon();
    degrees
        .0
        .iter()
        .zip(m_tilde)
        .enumerate()
        .map(|(i, (&m, mt))| {
            if mt == 0 {
                // Isolated node without degree protection: nothing to publish.
                return Ok(EdgeBudget {
                    node: i,
                    m,
                    m_tilde: 0,
                    e_real: 0,
                    e_false: 0,
                });
            }
            edge_budgets(i, m, mt.min(n - 1), n, eps2)
        })
        .collect()
}

/// Stages 4 to 7 on a prepared pipeline.
pub fn publish_with(
    graph: &Graph,
    prepared: &Prepared,
    budget: &PrivacyBudget,
    seed: u64,
) -> Result<Publication> {
    let n = graph.num_nodes();
    if prepared.scores.num_nodes() != n {
        return Err(Error::DimensionMismatch {
            context: "edge score rows",
            expected: n,
            actual: prepared.scores.num_nodes(),
        });
    }
    let start = Instant::now();
    let mut stage_ms = prepared.stage_ms.clone();

    let t = Instant::now();
    let budgets = compute_budgets(graph, budget, seed)?;
    stage_ms.insert("budgets".into(), elapsed_ms(t));

    let t = Instant::now();
    let picks: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |row, i| {
                prepared.scores.row_into(i, row)?;
                select_edges_for_node(i, row, graph.neighbors(i), &budgets[i])
            },
        )
        .collect::<Result<_>>()?;
    stage_ms.insert("select".into(), elapsed_ms(t));

    let t = Instant::now();
    let directed_degrees = picks.iter().map(Vec::len).collect();
    let edges: Vec<Edge> = picks
        .into_iter()
        .enumerate()
        .flat_map(|(i, js)| js.into_iter().map(move |j| (i, j)))
        .collect();
    let mut published = PublishedGraph::new(
        n,
        edges,
        prepared.mode.method(),
        budget.epsilon,
        budget.degree_share,
        seed,
    )?;
    stage_ms.insert("assemble".into(), elapsed_ms(t));

    let prepared_ms: u64 = prepared.stage_ms.values().sum();
    published.meta.elapsed_ms = prepared_ms + elapsed_ms(start);
    published.meta.stage_ms = stage_ms;
    Ok(Publication {
        published,
        budgets,
        directed_degrees,
    })
}

/// Full pipeline on the original graph.
pub fn graphpub_publish(
    graph: &Graph,
    budget: &PrivacyBudget,
    config: &GraphPubConfig,
    seed: u64,
) -> Result<PublishedGraph> {
    let prepared = prepare(graph, config, seed)?;
    Ok(publish_with(graph, &prepared, budget, seed)?.published)
}

/// Pipeline with one component replaced, see [`Mode`].
pub fn ablation_publish(
    graph: &Graph,
    budget: &PrivacyBudget,
    mode: Mode,
    config: &GraphPubConfig,
    seed: u64,
) -> Result<PublishedGraph> {
    if mode == Mode::Full {
        return Err(Error::invalid("ablation mode must be no-pgd or random-matrix"));
    }
    let config = GraphPubConfig {
        mode,
        ..config.clone()
    };
    graphpub_publish(graph, budget, &config, seed)
}

//! Seeded synthetic graphs with planted classes: a heavy-tailed,
//! homophilous edge set plus bag-of-words features drawn from per-class
//! topics. Used when real benchmark data is not on disk.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub num_features: usize,
    /// Words per node, before deduplication.
    pub words_per_node: usize,
    /// Vocabulary slice reserved for each class topic.
    pub topic_size: usize,
    /// Probability that a word comes from the node's class topic rather than
    /// the shared Zipf background.
    pub topic_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub name: String,
    pub class_sizes: Vec<usize>,
    pub num_edges: usize,
    /// Fraction of edges that join nodes of the same class.
    pub homophily: f64,
    /// Pareto tail index of the expected-degree weights.
    pub degree_exponent: f64,
    /// `None` leaves the graph featureless (identity features).
    pub features: Option<FeatureModel>,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Same size, class balance and sparsity as the Cora citation graph.
    pub fn cora_like(seed: u64) -> Self {
        Self {
            name: "cora-synth".into(),
            class_sizes: vec![351, 217, 418, 818, 426, 298, 180],
            num_edges: 5429,
            homophily: 0.68,
            degree_exponent: 2.1,
            features: Some(FeatureModel {
                num_features: 1433,
                words_per_node: 18,
                topic_size: 120,
                topic_prob: 0.16,
            }),
            seed,
        }
    }

    /// Two-community, featureless graph sized like the Polblogs network.
    pub fn polblogs_like(seed: u64) -> Self {
        Self {
            name: "polblogs-synth".into(),
            class_sizes: vec![758, 732],
            num_edges: 16715,
            homophily: 0.91,
            degree_exponent: 1.8,
            features: None,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.class_sizes.is_empty() || self.class_sizes.contains(&0) {
            return Err(Error::invalid("every class needs at least one node"));
        }
        if n < 2 || self.num_edges < n.div_ceil(2) || self.num_edges > n * (n - 1) / 4 {
            return Err(Error::invalid(format!(
                "edge count {} is outside the supported range for {n} nodes",
                self.num_edges
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::invalid("homophily must lie in [0, 1]"));
        }
        if !(self.degree_exponent > 1.0) {
            return Err(Error::invalid("degree exponent must exceed 1"));
        }
        if let Some(f) = &self.features {
            if f.topic_size == 0 || f.topic_size > f.num_features || f.words_per_node == 0 {
                return Err(Error::invalid("invalid feature model"));
            }
            if !(0.0..=1.0).contains(&f.topic_prob) {
                return Err(Error::invalid("topic probability must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

struct ClassSampler {
    members: Vec<Vec<usize>>,
    within: Vec<WeightedAliasIndex<f64>>,
    /// Per class, a sampler over all nodes outside it.
    outside: Vec<(Vec<usize>, WeightedAliasIndex<f64>)>,
}

impl ClassSampler {
    fn new(labels: &[usize], weights: &[f64], classes: usize) -> Self {
        let mut members = vec![Vec::new(); classes];
        for (i, &c) in labels.iter().enumerate() {
            members[c].push(i);
        }
        let alias = |nodes: &[usize]| {
            WeightedAliasIndex::new(nodes.iter().map(|&i| weights[i]).collect()).expect("positive weights")
        };
        let within = members.iter().map(|m| alias(m)).collect();
        let outside = (0..classes)
            .map(|c| {
                let others: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != c).collect();
                let a = alias(&others);
                (others, a)
            })
            .collect();
        Self {
            members,
            within,
            outside,
        }
    }

    fn partner(&self, rng: &mut ChaCha8Rng, class: usize, same: bool) -> usize {
        if same || self.outside[class].0.is_empty() {
            self.members[class][self.within[class].sample(rng)]
        } else {
            let (nodes, alias) = &self.outside[class];
            nodes[alias.sample(rng)]
        }
    }
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|r| 1.0 / r as f64).collect()
}

pub fn generate(config: &SyntheticConfig) -> Result<Graph> {
    config.validate()?;
    let n = config.num_nodes();
    let classes = config.class_sizes.len();
    let mut rng = rng::stream(config.seed, "synth");

    let mut labels: Vec<usize> = config
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    labels.shuffle(&mut rng);

    // Pareto expected degrees, capped so no node dominates the sampler.
    let cap = (n as f64).sqrt() * 3.0;
    let weights: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            (1.0 - u).powf(-1.0 / config.degree_exponent).min(cap)
        })
        .collect();
    let sampler = ClassSampler::new(&labels, &weights, classes);
    let global = WeightedAliasIndex::new(weights.clone()).expect("positive weights");

    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(config.num_edges);
    let mut degree = vec![0usize; n];
    let add = |a: usize, b: usize, edges: &mut HashSet<(usize, usize)>, degree: &mut [usize]| -> bool {
        if a == b {
            return false;
        }
        if edges.insert((a.min(b), a.max(b))) {
            degree[a] += 1;
            degree[b] += 1;
            true
        } else {
            false
        }
    };

    // Every node gets at least one edge.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &i in &order {
        if degree[i] > 0 {
            continue;
        }
        loop {
            let same = rng.random_bool(config.homophily);
            let j = sampler.partner(&mut rng, labels[i], same);
            if add(i, j, &mut edges, &mut degree) {
                break;
            }
        }
    }
    while edges.len() < config.num_edges {
        let i = global.sample(&mut rng);
        let same = rng.random_bool(config.homophily);
        let j = sampler.partner(&mut rng, labels[i], same);
        add(i, j, &mut edges, &mut degree);
    }

    let features = match &config.features {
        None => CsrMatrix::identity(n),
        Some(fm) => bag_of_words(fm, &labels, classes, &mut rng)?,
    };
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    Graph::new(&config.name, n, edges, features, labels, classes)
}

fn bag_of_words(fm: &FeatureModel, labels: &[usize], classes: usize, rng: &mut ChaCha8Rng) -> Result<CsrMatrix> {
    // Topic vocabularies are random word subsets and may overlap.
    let vocab: Vec<usize> = (0..fm.num_features).collect();
    let topics: Vec<Vec<usize>> = (0..classes)
        .map(|_| vocab.choose_multiple(rng, fm.topic_size).copied().collect())
        .collect();
    let topic_dist = WeightedAliasIndex::new(zipf_weights(fm.topic_size)).expect("weights");
    let mut background_order = vocab.clone();
    background_order.shuffle(rng);
    let background = WeightedAliasIndex::new(zipf_weights(fm.num_features)).expect("weights");

    let rows = labels
        .iter()
        .map(|&c| {
            let mut words: Vec<usize> = (0..fm.words_per_node)
                .map(|_| {
                    if rng.random_bool(fm.topic_prob) {
                        topics[c][topic_dist.sample(rng)]
                    } else {
                        background_order[background.sample(rng)]
                    }
                })
                .collect();
            words.sort_unstable();
            words.dedup();
            words.into_iter().map(|w| (w, 1.0)).collect()
        })
        .collect();
    CsrMatrix::from_rows(fm.num_features, rows)
}

#![allow(dead_code)]

use graphpub::gnn::{Arch, TrainingLog, Weights};
use graphpub::sparse::CsrMatrix;
use graphpub::synth::{generate, FeatureModel, SyntheticConfig};
use graphpub::{Graph, TrainedModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random features with roughly half the entries set.
pub fn random_features(n: usize, f: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
    let rows = (0..n)
        .map(|_| {
            let mut row = Vec::new();
            for c in 0..f {
                if rng.random_bool(0.6) {
                    row.push((c, rng.random_range(-1.0..1.0)));
                }
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(f, rows).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

pub fn random_weights(arch: Arch, f: usize, h: usize, c: usize, rng: &mut ChaCha8Rng) -> Weights {
    let [s1, s2] = Weights::shapes(arch, f, h, c);
    Weights {
        w1: random_matrix(s1.0, s1.1, 1.0, rng),
        w2: random_matrix(s2.0, s2.1, 1.0, rng),
    }
}

/// Symmetric, zero-diagonal matrix with entries in `[lo, hi)`.
pub fn random_fractional_adjacency(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(lo..hi);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

pub fn random_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn model(arch: Arch, weights: Weights) -> TrainedModel {
    TrainedModel {
        arch,
        weights,
        log: TrainingLog::default(),
    }
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, or the absolute error when both are tiny.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

/// A few hundred nodes with planted classes; trains in milliseconds.
pub fn small_graph(seed: u64) -> Graph {
    generate(&SyntheticConfig {
        name: "small".into(),
        class_sizes: vec![60, 50, 40],
        num_edges: 400,
        homophily: 0.8,
        degree_exponent: 2.2,
        features: Some(FeatureModel {
            num_features: 80,
            words_per_node: 10,
            topic_size: 15,
            topic_prob: 0.4,
        }),
        seed,
    })
    .unwrap()
}

//! Encoder/decoder edge scoring. A two-layer classifier trained on the
//! suppositional adjacency supplies first-layer embeddings `Z`; the decoder
//! scores a pair as `σ(⟨Z_i, Z_j⟩)`, one row at a time.

use crate::error::{Error, Result};
use crate::gnn::{self, Arch, Embeddings, Propagator, Structure, TrainConfig, TrainedModel};
use crate::graph::{Graph, SplitMask};
use crate::reverse::SuppositionalAdjacency;

/// Logistic sigmoid, evaluated without overflow for either sign.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub model: TrainedModel,
    pub embeddings: Embeddings,
}

/// Trains the encoder on an arbitrary structure (the suppositional
/// adjacency, or the original graph when reverse learning is skipped).
pub fn train_encoder_on(
    structure: Structure<'_>,
    graph: &Graph,
    splits: &SplitMask,
    arch: Arch,
    config: &TrainConfig,
) -> Result<Encoder> {
    let prop = Propagator::build(arch, structure)?;
    let model = gnn::train_with_propagator(
        &prop,
        graph.features(),
        graph.labels(),
        splits,
        graph.num_classes(),
        config,
    )?;
    let embeddings = gnn::extract_embeddings_with(&model, &prop, graph.features())?;
    Ok(Encoder { model, embeddings })
}

/// Fractional entries of `A_s` are used as edge weights as-is.
pub fn train_encoder(
    a_s: &SuppositionalAdjacency,
    graph: &Graph,
    splits: &SplitMask,
    arch: Arch,
    config: &TrainConfig,
) -> Result<Encoder> {
    if a_s.num_nodes() != graph.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "suppositional adjacency size",
            expected: graph.num_nodes(),
            actual: a_s.num_nodes(),
        });
    }
    train_encoder_on(Structure::Dense(a_s.matrix()), graph, splits, arch, config)
}

fn check_row(z: &Embeddings, i: usize) -> Result<()> {
    if i >= z.num_nodes() {
        return Err(Error::NodeOutOfRange {
            index: i,
            num_nodes: z.num_nodes(),
        });
    }
    Ok(())
}

/// Inner products `⟨Z_i, Z_j⟩` for every `j`, written into `out`.
pub fn logit_row_into(z: &Embeddings, i: usize, out: &mut [f64]) -> Result<()> {
    check_row(z, i)?;
    let zi = z.0.row(i);
    for (o, zj) in out.iter_mut().zip(z.0.rows()) {
        *o = zi.dot(&zj);
    }
    Ok(())
}

/// Row `i` of `L = σ(Z Zᵀ)`.
pub fn decode_row(z: &Embeddings, i: usize) -> Result<Vec<f64>> {
    let mut row = vec![0.0; z.num_nodes()];
    logit_row_into(z, i, &mut row)?;
    row.iter_mut().for_each(|v| *v = sigmoid(*v));
    Ok(row)
}

/// Lazily evaluated probability matrix; rows are computed on demand and
/// never stored together.
#[derive(Debug, Clone, Copy)]
pub struct ProbabilityMatrix<'a> {
    z: &'a Embeddings,
}

impl<'a> ProbabilityMatrix<'a> {
    pub fn new(z: &'a Embeddings) -> Self {
        Self { z }
    }

    pub fn num_nodes(&self) -> usize {
        self.z.num_nodes()
    }

    pub fn row(&self, i: usize) -> Result<Vec<f64>> {
        decode_row(self.z, i)
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        check_row(self.z, i)?;
        check_row(self.z, j)?;
        Ok(sigmoid(self.z.0.row(i).dot(&self.z.0.row(j))))
    }
}

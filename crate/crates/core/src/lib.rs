//! Edge-level differentially private graph publishing.
//!
//! The pipeline trains a GCN on the private graph, reverse-learns a dense
//! suppositional adjacency that reproduces its predictions, trains an
//! encoder on that adjacency and publishes, per node, a budgeted mix of
//! true and fabricated edges ranked by decoder score. Randomized response,
//! DPRR and LapGraph baselines, an embedding-similarity attack and a sweep
//! harness are included.

pub mod attack;
pub mod bench;
pub mod dp;
pub mod encoder;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod published;
pub mod publisher;
pub mod reverse;
pub mod rng;
pub mod sparse;
pub mod synth;
mod topk;

pub use attack::{
    degree_cosine_similarity, embedding_similarity_attack, precision_recall, retrain_accuracy, AttackReport,
    AttackResult,
};
pub use bench::{run_benchmark, BenchmarkPlan, BenchmarkReport};
pub use dp::{
    dprr_publish, edge_budgets, lapgraph_publish, perturb_degrees, rr_probs, rr_publish, EdgeBudget,
    LaplaceSampler, PrivacyBudget,
};
pub use encoder::{decode_row, sigmoid, Encoder};
pub use error::{Error, Result};
pub use gnn::{Arch, TrainConfig, TrainedModel};
pub use graph::{degree_vector, load_dataset, make_splits, save_dataset, DegreeVector, Edge, Graph, SplitMask};
pub use published::{Method, PublishMeta, PublishedGraph};
pub use publisher::{
    ablation_publish, graphpub_publish, prepare, publish_with, select_edges_for_node, GraphPubConfig, Mode,
    Prepared, Publication,
};
pub use reverse::{learn_suppositional_adjacency, ReverseConfig, SuppositionalAdjacency};
pub use synth::SyntheticConfig;

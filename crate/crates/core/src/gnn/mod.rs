//! From-scratch full-batch GNN engine.

pub mod adjacency;
pub mod model;
pub mod train;

pub use adjacency::{
    normalize_adjacency, DenseNormalization, MeanAggregator, NormalizedAdjacency, Operator, Structure,
};
pub use model::{Arch, Propagator, Weights};
pub use train::{
    extract_embeddings, extract_embeddings_with, load_checkpoint, predict, predict_with, save_checkpoint,
    train_model, train_with_propagator, Embeddings, Optimizer, Prediction, TrainConfig, TrainedModel,
    TrainingLog,
};

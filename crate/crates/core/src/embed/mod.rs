//! The shallow encoder-decoder-classifier embedding model: forward passes,
//! all loss terms with analytic gradients, and the inductive training loop.

pub mod loss;
pub mod model;
pub mod train;

pub use loss::{
    l2_regularizer, loss_class_encoder, loss_classifier, loss_latent_align,
    loss_structure_align, total_loss, LossBreakdown, LossWeights, TrainBatch,
};
pub use model::{EmbedGrads, EmbedModel, DEFAULT_LATENT_DIM, DEFAULT_SEMANTIC_HIDDEN};
pub use train::{train_inductive, EmbedOptimizer, EpochStats, TrainConfig, TrainMode};

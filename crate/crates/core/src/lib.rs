//! Zero-shot learning with a discriminative latent embedding space.
//!
//! The library trains a shallow encoder-decoder that projects visual
//! features and semantic class prototypes into a common latent space
//! (inductive setting), synthesizes per-sample semantic features for
//! unlabeled samples with a conditional VAE, and refines pseudo-labels
//! through a self-taught transductive loop. Evaluation covers ZSL and
//! generalized ZSL with macro per-class accuracy and the harmonic mean.

pub mod cvae;
pub mod data;
pub mod embed;
pub mod error;
pub mod num;
pub mod rng;

pub use error::{Error, Result};
pub use num::Matrix;

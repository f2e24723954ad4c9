//! Dataset representation, file ingestion, synthetic generation, split
//! management, and fractional per-class subsampling.

pub mod dataset;
pub mod layout;
pub mod synth;

pub use dataset::{class_means, class_means_over_rows, subsample_per_class, Dataset, Splits};
pub use layout::{load_dataset, save_dataset};
pub use synth::{generate_synthetic, SynthSpec};

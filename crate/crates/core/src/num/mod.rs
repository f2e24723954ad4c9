//! Dense-matrix numerical core: activations, loss primitives, analytic
//! gradients, the Adam optimizer, and a finite-difference gradient oracle.

pub mod adam;
pub mod gradcheck;
pub mod matrix;
pub mod ops;

pub use adam::{adam_update, AdamState};
pub use gradcheck::{finite_difference_grad, max_relative_error, DEFAULT_STEP};
pub use matrix::Matrix;
pub use ops::{mse_sum, relu, relu_mask, softmax, softmax_cross_entropy};

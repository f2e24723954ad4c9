//! Adam optimizer with bias-corrected moment estimates.

use crate::num::Matrix;

/// Per-parameter Adam state. Moments always match the parameter shape.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Matrix,
    second_moment: Matrix,
    step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with standard defaults (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn new(rows: usize, cols: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: Matrix::zeros(rows, cols),
            second_moment: Matrix::zeros(rows, cols),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update: `param -= lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// Mutates `param` and `state` in place; deterministic for identical inputs.
pub fn adam_update(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) {
    assert_eq!(param.shape(), grad.shape(), "adam_update shape mismatch");
    assert_eq!(
        param.shape(),
        state.first_moment.shape(),
        "adam state shape mismatch"
    );
    assert!(state.epsilon > 0.0, "epsilon must be positive");

    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    let p = param.data_mut();
    for i in 0..p.len() {
        let g = grad.data()[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

//! Central finite-difference gradient oracle for verifying analytic gradients.

use crate::num::Matrix;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
pub fn finite_difference_grad(loss_fn: impl Fn(&Matrix) -> f64, at: &Matrix, h: f64) -> Matrix {
    assert!(h > 0.0, "step must be positive");
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    let mut probe = at.clone();
    for i in 0..at.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = loss_fn(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = loss_fn(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Elementwise relative error with denominator `max(|a|, |b|, 1e-8)`, maximized.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "relative error shape mismatch");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::ops::softmax_cross_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn sum_of_squares_derivative() {
        let at = Matrix::from_rows(&[&[3.0]]);
        let g = finite_difference_grad(|m| m.sum_squares(), &at, 1e-5);
        assert!((g.get(0, 0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let at = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 4.0]]);
        let g = finite_difference_grad(|_| 42.0, &at, 1e-5);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_analytic_cross_entropy_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let logits =
            Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let targets = vec![1, 3, 0];
        let (_, analytic) = softmax_cross_entropy(&logits, &targets).unwrap();
        let fd = finite_difference_grad(
            |m| softmax_cross_entropy(m, &targets).unwrap().0,
            &logits,
            DEFAULT_STEP,
        );
        assert!(max_relative_error(&analytic, &fd) < 1e-4);
    }
}

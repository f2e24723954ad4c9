//! Elementwise activations and loss primitives with analytic gradients.

use crate::error::{Error, Result};
use crate::num::Matrix;

/// Elementwise max(0, x); shape preserved.
pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient mask of ReLU at the pre-activation `z`: 1 where z > 0, else 0.
pub fn relu_mask(z: &Matrix) -> Matrix {
    z.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Row-wise softmax, stabilized by max-subtraction before exponentiation.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of row-wise softmax against integer targets.
///
/// Returns the loss together with its gradient w.r.t. the logits (already
/// divided by the row count, matching the mean).
pub fn softmax_cross_entropy(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    let (n, c) = logits.shape();
    if targets.len() != n {
        return Err(Error::ShapeMismatch {
            context: "softmax_cross_entropy",
            expected: format!("{n} targets"),
            got: format!("{}", targets.len()),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput {
            context: "softmax_cross_entropy",
        });
    }
    for &t in targets {
        if t >= c {
            return Err(Error::UnknownClass { class: t, known: c });
        }
    }

    let mut grad = softmax(logits);
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (r, &t) in targets.iter().enumerate() {
        // -log p[t] computed from the stabilized form to survive saturated logits.
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += -(row[t] - max - log_sum);

        let grow = grad.row_mut(r);
        grow[t] -= 1.0;
        for v in grow.iter_mut() {
            *v *= inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// Sum of squared row differences: `sum_i ||pred_i - ref_i||^2`.
///
/// The gradient w.r.t. `pred` is `2 (pred - ref)`.
pub fn mse_sum(pred: &Matrix, reference: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != reference.shape() {
        return Err(Error::ShapeMismatch {
            context: "mse_sum",
            expected: format!("{:?}", reference.shape()),
            got: format!("{:?}", pred.shape()),
        });
    }
    let diff = pred.sub(reference);
    let loss = diff.sum_squares();
    Ok((loss, diff.scale(2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::gradcheck::{finite_difference_grad, max_relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn relu_sign_cases() {
        let x = Matrix::from_rows(&[&[-1.0, 2.0], &[0.0, -3.0]]);
        assert_eq!(relu(&x).data(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_zero_fixed_point() {
        let x = Matrix::zeros(3, 2);
        assert_eq!(relu(&x), x);
    }

    #[test]
    fn relu_identity_on_positives() {
        let x = Matrix::from_rows(&[&[5.5]]);
        assert_eq!(relu(&x).data(), &[5.5]);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Matrix::from_rows(&[&[0.0, 0.0]]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn cross_entropy_saturated_correct() {
        let logits = Matrix::from_rows(&[&[100.0, 0.0]]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-10, "loss = {loss}");
    }

    #[test]
    fn cross_entropy_matches_direct_evaluation() {
        // Oracle: -log(e^3 / (e^1 + e^2 + e^3)) evaluated without the stabilized path.
        let logits = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[2]).unwrap();
        let denom = 1f64.exp() + 2f64.exp() + 3f64.exp();
        let expected = -(3f64.exp() / denom).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((expected - 0.407606).abs() < 1e-6);
        for j in 0..3 {
            let p = ((j as f64 + 1.0).exp()) / denom;
            let e = if j == 2 { p - 1.0 } else { p };
            assert!((grad.get(0, j) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_target() {
        let logits = Matrix::from_rows(&[&[0.0, 0.0]]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[2]),
            Err(crate::error::Error::UnknownClass { .. })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let m = Matrix::from_vec(3, 4, data).unwrap();
            let s = softmax(&m);
            for r in 0..3 {
                let sum: f64 = s.row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mse_identical_inputs_is_exactly_zero() {
        let a = Matrix::from_rows(&[&[1.5, -2.25], &[0.0, 1e10]]);
        let (loss, grad) = mse_sum(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_unit_displacement() {
        let pred = Matrix::from_rows(&[&[1.0, 0.0]]);
        let rf = Matrix::from_rows(&[&[0.0, 0.0]]);
        let (loss, grad) = mse_sum(&pred, &rf).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[2.0, 0.0]);
    }

    #[test]
    fn mse_matches_scalar_loop_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let b = Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let (loss, _) = mse_sum(&a, &b).unwrap();
        let mut expected = 0.0;
        for r in 0..3 {
            for c in 0..4 {
                let d = a.get(r, c) - b.get(r, c);
                expected += d * d;
            }
        }
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(mse_sum(&a, &b).is_err());
    }

    #[test]
    fn cross_entropy_grad_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..10 {
            let logits =
                Matrix::from_vec(4, 5, (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .unwrap();
            let targets: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
            let (_, analytic) = softmax_cross_entropy(&logits, &targets).unwrap();
            let fd = finite_difference_grad(
                |m| softmax_cross_entropy(m, &targets).unwrap().0,
                &logits,
                1e-5,
            );
            assert!(max_relative_error(&analytic, &fd) < 1e-4);
        }
    }
}

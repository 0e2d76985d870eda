//! Differentiable vector primitives shared by the fusion layers.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax over a vector: exponents are shifted by the
/// maximum entry before normalization.
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Softmax followed by negative log-likelihood of `target`.
///
/// Returns the loss and its gradient with respect to the logits
/// (`p - onehot(target)`).
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::ShapeMismatch {
            context: "softmax_cross_entropy",
            expected: format!("target < {}", logits.len()),
            actual: format!("target = {target}"),
        });
    }
    let p = softmax(logits)?;
    // Log-sum-exp form keeps the loss finite even when p[target] underflows.
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let mut grad = p;
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// `W·x + b` for a rank-2 weight and rank-1 bias.
pub fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = affine_dims(w, b, x.len())?;
    let wd = w.data();
    let mut out = b.data().to_vec();
    for r in 0..rows {
        let row = &wd[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] += acc;
    }
    Ok(out)
}

/// Backward pass of [`affine`]: accumulates gradients for the weight and bias
/// into the given buffers and returns the gradient with respect to `x`.
pub fn affine_backward(
    w: &Tensor,
    x: &[f64],
    grad_out: &[f64],
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Result<Vec<f64>> {
    let (rows, cols) = affine_dims(w, grad_b, x.len())?;
    if grad_out.len() != rows {
        return Err(Error::ShapeMismatch {
            context: "affine_backward",
            expected: format!("grad_out of length {rows}"),
            actual: format!("{}", grad_out.len()),
        });
    }
    let wd = w.data();
    let gw = grad_w.data_mut();
    let mut grad_x = vec![0.0; cols];
    for r in 0..rows {
        let go = grad_out[r];
        let row = &wd[r * cols..(r + 1) * cols];
        let grow = &mut gw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            grow[c] += go * x[c];
            grad_x[c] += go * row[c];
        }
    }
    for (gb, go) in grad_b.data_mut().iter_mut().zip(grad_out) {
        *gb += go;
    }
    Ok(grad_x)
}

fn affine_dims(w: &Tensor, b: &Tensor, x_len: usize) -> Result<(usize, usize)> {
    if w.rank() != 2 || b.rank() != 1 || w.shape()[1] != x_len || w.shape()[0] != b.shape()[0] {
        return Err(Error::ShapeMismatch {
            context: "affine",
            expected: format!("W rows×{} with matching bias", x_len),
            actual: format!("W {:?}, b {:?}", w.shape(), b.shape()),
        });
    }
    Ok((w.shape()[0], w.shape()[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_rel_err};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_symmetry() {
        let out = softmax(&[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_analytic_two_thirds() {
        let out = softmax(&[0.0, 2.0_f64.ln()]).unwrap();
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((out[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-4.0..4.0)).collect();
        let out = softmax(&x).unwrap();
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(out.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn softmax_shift_invariant() {
        let x = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 37.5).collect();
        let a = softmax(&x).unwrap();
        let b = softmax(&shifted).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn affine_identity() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(vec![2]);
        assert_eq!(affine(&w, &b, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn affine_zero_weight_returns_bias() {
        let w = Tensor::zeros(vec![1, 3]);
        let b = Tensor::from_vec(vec![3.0]);
        assert_eq!(affine(&w, &b, &[9.0, -4.0, 0.5]).unwrap(), vec![3.0]);
    }

    #[test]
    fn affine_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w_data: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b_data: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Tensor::new(vec![4, 3], w_data.clone()).unwrap();
        let b = Tensor::new(vec![4], b_data.clone()).unwrap();
        let got = affine(&w, &b, &x).unwrap();
        // Independent double-loop oracle.
        for r in 0..4 {
            let mut expect = b_data[r];
            for c in 0..3 {
                expect += w_data[r * 3 + c] * x[c];
            }
            assert!((got[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_rejects_dimension_mismatch() {
        let w = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2]);
        assert!(affine(&w, &b, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, analytic) = softmax_cross_entropy(&x, 1).unwrap();
        let numeric = finite_diff_grad(
            &mut |t: &Tensor| Ok(softmax_cross_entropy(t.data(), 1)?.0),
            &Tensor::from_vec(x),
            1e-5,
        )
        .unwrap();
        let analytic = Tensor::from_vec(analytic);
        assert!(max_rel_err(&analytic, &numeric) <= 1e-4);
    }

    #[test]
    fn affine_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Tensor::new(
            vec![4, 3],
            (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b = Tensor::new(vec![4], (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

        // Scalar objective: sum of squares of the affine output.
        let loss = |w: &Tensor, b: &Tensor, x: &[f64]| -> f64 {
            affine(w, b, x)
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
        };

        let out = affine(&w, &b, &x).unwrap();
        let grad_out: Vec<f64> = out.iter().map(|v| 2.0 * v).collect();
        let mut gw = Tensor::zeros(vec![4, 3]);
        let mut gb = Tensor::zeros(vec![4]);
        let gx = affine_backward(&w, &x, &grad_out, &mut gw, &mut gb).unwrap();

        let nw = finite_diff_grad(&mut |t: &Tensor| Ok(loss(t, &b, &x)), &w, 1e-5).unwrap();
        let nb = finite_diff_grad(&mut |t: &Tensor| Ok(loss(&w, t, &x)), &b, 1e-5).unwrap();
        let nx = finite_diff_grad(
            &mut |t: &Tensor| Ok(loss(&w, &b, t.data())),
            &Tensor::from_vec(x.clone()),
            1e-5,
        )
        .unwrap();

        assert!(max_rel_err(&gw, &nw) <= 1e-4);
        assert!(max_rel_err(&gb, &nb) <= 1e-4);
        assert!(max_rel_err(&Tensor::from_vec(gx), &nx) <= 1e-4);
    }
}

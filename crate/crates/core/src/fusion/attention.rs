//! Parameter-free attention gating and modality fusion.

use crate::error::{Error, Result};
use crate::numerics::softmax;

/// Gate a modality vector by its own softmax: o = softmax(x) ⊙ x.
pub fn attention_apply(x: &[f64]) -> Result<Vec<f64>> {
    let s = softmax(x)?;
    Ok(s.iter().zip(x).map(|(si, xi)| si * xi).collect())
}

/// Backward pass of [`attention_apply`]; needs the input and its softmax.
pub fn attention_backward(x: &[f64], s: &[f64], grad_out: &[f64]) -> Vec<f64> {
    // o_i = s_i·x_i with ∂s_i/∂x_j = s_i(δ_ij − s_j), which collapses to
    // gx_j = s_j·(go_j·(1 + x_j) − Σ_i go_i·s_i·x_i).
    let t: f64 = grad_out
        .iter()
        .zip(s)
        .zip(x)
        .map(|((g, si), xi)| g * si * xi)
        .sum();
    s.iter()
        .zip(x)
        .zip(grad_out)
        .map(|((si, xi), gi)| si * (gi * (1.0 + xi) - t))
        .collect()
}

/// Merge per-modality embeddings: plain concatenation, or attention gating
/// per modality followed by concatenation. Returns the fused vector and the
/// start offset of each modality's sub-vector.
pub fn fuse(embeddings: &[Vec<f64>], use_attention: bool) -> Result<(Vec<f64>, Vec<usize>)> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("fuse"));
    }
    let mut fused = Vec::with_capacity(embeddings.iter().map(Vec::len).sum());
    let mut offsets = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        offsets.push(fused.len());
        if use_attention {
            fused.extend(attention_apply(e)?);
        } else {
            fused.extend_from_slice(e);
        }
    }
    Ok((fused, offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_rel_err, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_vector_stays_zero() {
        let o = attention_apply(&[0.0; 6]).unwrap();
        assert!(o.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_vector_gives_c_over_n() {
        for n in [2usize, 4, 8, 16] {
            let c = -1.7;
            let o = attention_apply(&vec![c; n]).unwrap();
            for v in o {
                assert_eq!(v, c / n as f64);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-2.0..2.0)).collect();
        let o = attention_apply(&x).unwrap();
        let s = softmax(&x).unwrap();
        // Loss: squared norm of the gated vector.
        let grad_out: Vec<f64> = o.iter().map(|v| 2.0 * v).collect();
        let analytic = attention_backward(&x, &s, &grad_out);
        let numeric = finite_diff_grad(
            &mut |t: &Tensor| {
                Ok(attention_apply(t.data())?
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>())
            },
            &Tensor::from_vec(x.clone()),
            1e-5,
        )
        .unwrap();
        assert!(max_rel_err(&Tensor::from_vec(analytic), &numeric) <= 1e-4);
    }

    #[test]
    fn positive_vectors_preserve_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
            let o = attention_apply(&x).unwrap();
            let argmax = |v: &[f64]| {
                v.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            };
            assert_eq!(argmax(&x), argmax(&o));
        }
    }

    #[test]
    fn naive_fusion_concatenates() {
        let (fused, offsets) = fuse(&[vec![1.0; 128], vec![2.0; 16]], false).unwrap();
        assert_eq!(fused.len(), 144);
        assert_eq!(offsets, vec![0, 128]);
        assert_eq!(fused[127], 1.0);
        assert_eq!(fused[128], 2.0);
    }

    #[test]
    fn attention_on_single_zero_vector_is_zero() {
        let (fused, _) = fuse(&[vec![0.0; 8]], true).unwrap();
        assert!(fused.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attention_scales_constant_modalities_by_inverse_length() {
        let a = vec![3.0; 8];
        let b = vec![-0.5; 4];
        let (naive, _) = fuse(&[a.clone(), b.clone()], false).unwrap();
        let (attended, offsets) = fuse(&[a, b], true).unwrap();
        for i in 0..8 {
            assert!((attended[i] - naive[i] / 8.0).abs() < 1e-15);
        }
        for i in 8..12 {
            assert!((attended[i] - naive[i] / 4.0).abs() < 1e-15);
        }
        assert_eq!(offsets, vec![0, 8]);
    }

    #[test]
    fn fused_sub_vectors_recoverable_at_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let parts: Vec<Vec<f64>> = [16usize, 32, 8]
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        for use_attention in [false, true] {
            let (fused, offsets) = fuse(&parts, use_attention).unwrap();
            for (m, part) in parts.iter().enumerate() {
                let start = offsets[m];
                let end = offsets.get(m + 1).copied().unwrap_or(fused.len());
                let expect = if use_attention {
                    attention_apply(part).unwrap()
                } else {
                    part.clone()
                };
                assert_eq!(&fused[start..end], expect.as_slice());
            }
        }
    }

    #[test]
    fn empty_list_errors() {
        assert!(fuse(&[], false).is_err());
    }
}

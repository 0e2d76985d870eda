//! Tiny spatiotemporal clip encoder: two strided 3-D convolutions with tanh,
//! global mean pooling, and a dense projection to the embedding size.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fusion::layers::{tanh_backward, tanh_forward, Conv3d, Dense};
use crate::numerics::{Parameter, Tensor};

/// Convolution sizing for one encoder.
#[derive(Clone, Copy, Debug)]
pub struct EncoderGeometry {
    pub mid_channels: usize,
    pub out_channels: usize,
    pub k1: (usize, usize, usize),
    pub s1: (usize, usize, usize),
    pub k2: (usize, usize, usize),
    pub s2: (usize, usize, usize),
}

impl EncoderGeometry {
    /// For 16 × 224 × 224 video clips (RGB or flow-magnitude input).
    pub fn video() -> Self {
        EncoderGeometry {
            mid_channels: 4,
            out_channels: 8,
            k1: (2, 8, 8),
            s1: (2, 8, 8),
            k2: (3, 3, 3),
            s2: (1, 2, 2),
        }
    }

    /// For 1 × frames × 256 spectrogram clips; the temporal kernel is 1, so
    /// the convolution is effectively 2-D.
    pub fn spectrogram() -> Self {
        EncoderGeometry {
            mid_channels: 4,
            out_channels: 8,
            k1: (1, 5, 16),
            s1: (1, 2, 8),
            k2: (1, 3, 3),
            s2: (1, 2, 2),
        }
    }

    /// Small geometry for gradient checks on toy inputs.
    pub fn tiny() -> Self {
        EncoderGeometry {
            mid_channels: 2,
            out_channels: 3,
            k1: (2, 2, 2),
            s1: (1, 2, 2),
            k2: (1, 2, 2),
            s2: (1, 1, 1),
        }
    }
}

/// Two Conv3D + mean-pool + dense projection.
#[derive(Clone, Debug)]
pub struct ClipEncoder {
    pub conv1: Conv3d,
    pub conv2: Conv3d,
    pub proj: Dense,
}

/// Forward intermediates kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    t1: Tensor,
    t2: Tensor,
    pooled: Vec<f64>,
}

impl ClipEncoder {
    pub fn new(
        name: &str,
        in_channels: usize,
        embedding: usize,
        geometry: &EncoderGeometry,
        rng: &mut impl Rng,
    ) -> Self {
        ClipEncoder {
            conv1: Conv3d::new(
                &format!("{name}.conv1"),
                geometry.mid_channels,
                in_channels,
                geometry.k1,
                geometry.s1,
                rng,
            ),
            conv2: Conv3d::new(
                &format!("{name}.conv2"),
                geometry.out_channels,
                geometry.mid_channels,
                geometry.k2,
                geometry.s2,
                rng,
            ),
            proj: Dense::new(
                &format!("{name}.proj"),
                embedding,
                geometry.out_channels,
                rng,
            ),
        }
    }

    pub fn embedding_size(&self) -> usize {
        self.proj.out_dim()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Vec<f64>, EncoderCache)> {
        let t1 = tanh_forward(&self.conv1.forward(x)?);
        let t2 = tanh_forward(&self.conv2.forward(&t1)?);
        let shape = t2.shape();
        let (ch, volume) = (shape[0], shape[1] * shape[2] * shape[3]);
        let pooled: Vec<f64> = (0..ch)
            .map(|c| {
                t2.data()[c * volume..(c + 1) * volume].iter().sum::<f64>() / volume as f64
            })
            .collect();
        let embedding = self.proj.forward(&pooled)?;
        Ok((embedding, EncoderCache { t1, t2, pooled }))
    }

    /// Accumulate parameter gradients into six buffers ordered conv1, conv2,
    /// proj. The clip itself is data, so no input gradient is produced.
    pub fn backward(
        &self,
        x: &Tensor,
        cache: &EncoderCache,
        grad_embedding: &[f64],
        grads: &mut [Tensor],
    ) -> Result<()> {
        if grads.len() != Self::PARAMS {
            return Err(Error::Model(
                "ClipEncoder::backward expects 6 grad buffers".into(),
            ));
        }
        let (conv_grads, proj_grads) = grads.split_at_mut(4);
        let (c1_grads, c2_grads) = conv_grads.split_at_mut(2);

        let grad_pooled = self
            .proj
            .backward(&cache.pooled, grad_embedding, proj_grads)?;

        let shape = cache.t2.shape();
        let volume = shape[1] * shape[2] * shape[3];
        let mut grad_t2 = Tensor::zeros(shape.to_vec());
        for (c, g) in grad_pooled.iter().enumerate() {
            let spread = g / volume as f64;
            grad_t2.data_mut()[c * volume..(c + 1) * volume]
                .iter_mut()
                .for_each(|v| *v = spread);
        }

        let grad_c2 = tanh_backward(&cache.t2, &grad_t2);
        let grad_t1 = self
            .conv2
            .backward(&cache.t1, &grad_c2, c2_grads, true)?
            .expect("input grad requested");
        let grad_c1 = tanh_backward(&cache.t1, &grad_t1);
        self.conv1.backward(x, &grad_c1, c1_grads, false)?;
        Ok(())
    }

    pub const PARAMS: usize = 6;

    pub fn params(&self) -> Vec<&Parameter> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        p.extend(self.proj.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        p.extend(self.proj.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_rel_err};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut impl Rng) -> Tensor {
        Tensor::new(
            vec![2, 4, 8, 8],
            (0..2 * 4 * 8 * 8).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn embedding_has_configured_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = ClipEncoder::new("e", 3, 128, &EncoderGeometry::video(), &mut rng);
        assert_eq!(enc.embedding_size(), 128);
        let x = Tensor::filled(vec![3, 16, 224, 224], 0.1);
        let (emb, _) = enc.forward(&x).unwrap();
        assert_eq!(emb.len(), 128);
    }

    #[test]
    fn zero_clip_with_zero_biases_gives_zero_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = ClipEncoder::new("e", 2, 7, &EncoderGeometry::tiny(), &mut rng);
        // Biases are zero-initialized; a zero clip stays zero through conv,
        // tanh, pooling and the dense layer.
        let x = Tensor::zeros(vec![2, 4, 8, 8]);
        let (emb, _) = enc.forward(&x).unwrap();
        assert!(emb.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = ClipEncoder::new("e", 2, 7, &EncoderGeometry::tiny(), &mut rng);
        let x = Tensor::zeros(vec![3, 4, 8, 8]);
        assert!(enc.forward(&x).is_err());
    }

    #[test]
    fn full_encoder_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = ClipEncoder::new("e", 2, 5, &EncoderGeometry::tiny(), &mut rng);
        let x = random_input(&mut rng);

        // Loss: squared norm of the embedding.
        let loss_of = |e: &ClipEncoder, x: &Tensor| -> f64 {
            e.forward(x).unwrap().0.iter().map(|v| v * v).sum()
        };

        let (emb, cache) = enc.forward(&x).unwrap();
        let grad_emb: Vec<f64> = emb.iter().map(|v| 2.0 * v).collect();
        let mut grads: Vec<Tensor> = enc
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.value.shape().to_vec()))
            .collect();
        enc.backward(&x, &cache, &grad_emb, &mut grads).unwrap();

        for (i, p) in enc.params().iter().enumerate() {
            let numeric = finite_diff_grad(
                &mut |t: &Tensor| {
                    let mut e2 = enc.clone();
                    e2.params_mut()[i].value = t.clone();
                    Ok(loss_of(&e2, &x))
                },
                &p.value,
                1e-5,
            )
            .unwrap();
            assert!(
                max_rel_err(&grads[i], &numeric) <= 1e-4,
                "parameter {} rel err {}",
                p.name,
                max_rel_err(&grads[i], &numeric)
            );
        }
    }
}

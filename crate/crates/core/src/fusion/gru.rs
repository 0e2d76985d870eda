//! Gated recurrent unit over hot-vector sequences.
//!
//! The step computes, per unit:
//!   z = σ(W_z·x + U_z·h_prev)
//!   r = σ(W_r·x + U_r·h_prev)
//!   h̃ = tanh(W·x + U·(r ⊙ h_prev))
//!   h = h̃·(1 − z) + z·h_prev

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Parameter, Tensor};

/// GRU weights: three input projections and three recurrent projections.
#[derive(Clone, Debug)]
pub struct GruLayer {
    pub w: Parameter,
    pub u: Parameter,
    pub w_z: Parameter,
    pub u_z: Parameter,
    pub w_r: Parameter,
    pub u_r: Parameter,
}

/// Per-step intermediates needed by the backward pass.
#[derive(Clone, Debug)]
pub struct GruStepCache {
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub h_tilde: Vec<f64>,
}

impl GruLayer {
    pub fn new(name: &str, hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        let mk = |suffix: &str, rows: usize, cols: usize, rng: &mut dyn rand::RngCore| {
            let bound = (1.0 / cols as f64).sqrt();
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            Parameter::new(
                format!("{name}.{suffix}"),
                Tensor::new(vec![rows, cols], data).unwrap(),
            )
        };
        GruLayer {
            w: mk("w", hidden, input, rng),
            u: mk("u", hidden, hidden, rng),
            w_z: mk("w_z", hidden, input, rng),
            u_z: mk("u_z", hidden, hidden, rng),
            w_r: mk("w_r", hidden, input, rng),
            u_r: mk("u_r", hidden, hidden, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn input_size(&self) -> usize {
        self.w.value.shape()[1]
    }

    /// Update and reset gates for one step.
    pub fn gates(&self, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(x, h_prev)?;
        let z = matvec_pair(&self.w_z.value, x, &self.u_z.value, h_prev, sigmoid);
        let r = matvec_pair(&self.w_r.value, x, &self.u_r.value, h_prev, sigmoid);
        Ok((z, r))
    }

    /// Candidate activation h̃ for given reset gates.
    pub fn candidate(&self, x: &[f64], h_prev: &[f64], r: &[f64]) -> Vec<f64> {
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        matvec_pair(&self.w.value, x, &self.u.value, &rh, f64::tanh)
    }

    /// One step with externally supplied gates (the test harness uses this
    /// to force gate values).
    pub fn step_with_gates(&self, x: &[f64], h_prev: &[f64], z: &[f64], r: &[f64]) -> Vec<f64> {
        let h_tilde = self.candidate(x, h_prev, r);
        h_tilde
            .iter()
            .zip(h_prev)
            .zip(z)
            .map(|((ht, hp), zt)| ht * (1.0 - zt) + zt * hp)
            .collect()
    }

    /// One GRU step.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
        let (z, r) = self.gates(x, h_prev)?;
        Ok(self.step_with_gates(x, h_prev, &z, &r))
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, GruStepCache)> {
        let (z, r) = self.gates(x, h_prev)?;
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let h_tilde = matvec_pair(&self.w.value, x, &self.u.value, &rh, f64::tanh);
        let h = h_tilde
            .iter()
            .zip(h_prev)
            .zip(&z)
            .map(|((ht, hp), zt)| ht * (1.0 - zt) + zt * hp)
            .collect();
        Ok((
            h,
            GruStepCache {
                h_prev: h_prev.to_vec(),
                z,
                r,
                rh,
                h_tilde,
            },
        ))
    }

    /// Fold the step over a 16 × input sequence from a zero initial state;
    /// returns the final hidden state.
    pub fn sequence(&self, seq: &Tensor) -> Result<Vec<f64>> {
        Ok(self.sequence_cached(seq)?.0)
    }

    pub fn sequence_cached(&self, seq: &Tensor) -> Result<(Vec<f64>, Vec<GruStepCache>)> {
        if seq.rank() != 2
            || seq.shape()[0] != crate::diarization::HOT_FRAMES
            || seq.shape()[1] != self.input_size()
        {
            return Err(Error::ShapeMismatch {
                context: "GruLayer::sequence",
                expected: format!(
                    "{}x{}",
                    crate::diarization::HOT_FRAMES,
                    self.input_size()
                ),
                actual: format!("{:?}", seq.shape()),
            });
        }
        let n_in = self.input_size();
        let mut h = vec![0.0; self.hidden_size()];
        let mut caches = Vec::with_capacity(seq.shape()[0]);
        for t in 0..seq.shape()[0] {
            let x = &seq.data()[t * n_in..(t + 1) * n_in];
            let (h_next, cache) = self.step_cached(x, &h)?;
            caches.push(cache);
            h = h_next;
        }
        Ok((h, caches))
    }

    /// Backpropagate through the whole sequence. `grads` holds six buffers in
    /// parameter order (w, u, w_z, u_z, w_r, u_r); the input gradient is
    /// returned for completeness.
    pub fn sequence_backward(
        &self,
        seq: &Tensor,
        caches: &[GruStepCache],
        grad_h_final: &[f64],
        grads: &mut [Tensor],
    ) -> Result<Tensor> {
        if grads.len() != Self::PARAMS {
            return Err(Error::Model("GruLayer::backward expects 6 buffers".into()));
        }
        let n_in = self.input_size();
        let n_h = self.hidden_size();
        let mut grad_seq = vec![0.0; seq.len()];
        let mut dh = grad_h_final.to_vec();

        for t in (0..caches.len()).rev() {
            let c = &caches[t];
            let x = &seq.data()[t * n_in..(t + 1) * n_in];

            // h = h̃(1-z) + z·h_prev
            let dh_tilde: Vec<f64> = dh.iter().zip(&c.z).map(|(d, z)| d * (1.0 - z)).collect();
            let dz: Vec<f64> = dh
                .iter()
                .zip(&c.h_prev)
                .zip(&c.h_tilde)
                .map(|((d, hp), ht)| d * (hp - ht))
                .collect();
            let mut dh_prev: Vec<f64> = dh.iter().zip(&c.z).map(|(d, z)| d * z).collect();

            // h̃ = tanh(a_h), a_h = W·x + U·rh
            let da_h: Vec<f64> = dh_tilde
                .iter()
                .zip(&c.h_tilde)
                .map(|(d, ht)| d * (1.0 - ht * ht))
                .collect();
            accumulate_outer(&mut grads[0], &da_h, x);
            accumulate_outer(&mut grads[1], &da_h, &c.rh);
            let d_rh = matvec_transposed(&self.u.value, &da_h);
            let dr: Vec<f64> = d_rh.iter().zip(&c.h_prev).map(|(d, hp)| d * hp).collect();
            for ((dhp, d), r) in dh_prev.iter_mut().zip(&d_rh).zip(&c.r) {
                *dhp += d * r;
            }

            // z = σ(a_z)
            let da_z: Vec<f64> = dz.iter().zip(&c.z).map(|(d, z)| d * z * (1.0 - z)).collect();
            accumulate_outer(&mut grads[2], &da_z, x);
            accumulate_outer(&mut grads[3], &da_z, &c.h_prev);
            for (dhp, d) in dh_prev
                .iter_mut()
                .zip(matvec_transposed(&self.u_z.value, &da_z))
            {
                *dhp += d;
            }

            // r = σ(a_r)
            let da_r: Vec<f64> = dr.iter().zip(&c.r).map(|(d, r)| d * r * (1.0 - r)).collect();
            accumulate_outer(&mut grads[4], &da_r, x);
            accumulate_outer(&mut grads[5], &da_r, &c.h_prev);
            for (dhp, d) in dh_prev
                .iter_mut()
                .zip(matvec_transposed(&self.u_r.value, &da_r))
            {
                *dhp += d;
            }

            // Input gradient for this step.
            let mut dx = matvec_transposed(&self.w.value, &da_h);
            for (a, b) in dx.iter_mut().zip(matvec_transposed(&self.w_z.value, &da_z)) {
                *a += b;
            }
            for (a, b) in dx.iter_mut().zip(matvec_transposed(&self.w_r.value, &da_r)) {
                *a += b;
            }
            grad_seq[t * n_in..(t + 1) * n_in].copy_from_slice(&dx);

            dh = dh_prev;
        }
        let _ = n_h;
        Tensor::new(seq.shape().to_vec(), grad_seq)
    }

    pub const PARAMS: usize = 6;

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.w, &self.u, &self.w_z, &self.u_z, &self.w_r, &self.u_r]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w,
            &mut self.u,
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
        ]
    }

    fn check_dims(&self, x: &[f64], h_prev: &[f64]) -> Result<()> {
        if x.len() != self.input_size() || h_prev.len() != self.hidden_size() {
            return Err(Error::ShapeMismatch {
                context: "GruLayer::step",
                expected: format!("x {} / h {}", self.input_size(), self.hidden_size()),
                actual: format!("x {} / h {}", x.len(), h_prev.len()),
            });
        }
        Ok(())
    }
}

/// f(A·x + B·y) per row.
fn matvec_pair(
    a: &Tensor,
    x: &[f64],
    b: &Tensor,
    y: &[f64],
    f: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let rows = a.shape()[0];
    let (ac, bc) = (a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    (0..rows)
        .map(|r| {
            let mut acc = 0.0;
            for (av, xv) in ad[r * ac..(r + 1) * ac].iter().zip(x) {
                acc += av * xv;
            }
            for (bv, yv) in bd[r * bc..(r + 1) * bc].iter().zip(y) {
                acc += bv * yv;
            }
            f(acc)
        })
        .collect()
}

/// Aᵀ·g for a rows×cols matrix.
fn matvec_transposed(a: &Tensor, g: &[f64]) -> Vec<f64> {
    let (rows, cols) = (a.shape()[0], a.shape()[1]);
    let ad = a.data();
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let gr = g[r];
        for c in 0..cols {
            out[c] += ad[r * cols + c] * gr;
        }
    }
    out
}

/// grad += g ⊗ x.
fn accumulate_outer(grad: &mut Tensor, g: &[f64], x: &[f64]) {
    let cols = x.len();
    let gd = grad.data_mut();
    for (r, gr) in g.iter().enumerate() {
        for (c, xv) in x.iter().enumerate() {
            gd[r * cols + c] += gr * xv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_rel_err};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
        Tensor::new(
            vec![rows, cols],
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn forced_update_gate_keeps_previous_state_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gru = GruLayer::new("g", 16, 8, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_prev: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, r) = gru.gates(&x, &h_prev).unwrap();
        let h = gru.step_with_gates(&x, &h_prev, &vec![1.0; 16], &r);
        assert_eq!(h, h_prev);
    }

    #[test]
    fn zero_reset_gate_makes_candidate_ignore_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gru = GruLayer::new("g", 8, 4, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let zero_r = vec![0.0; 8];
        assert_eq!(
            gru.candidate(&x, &h_a, &zero_r),
            gru.candidate(&x, &h_b, &zero_r)
        );
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut gru = GruLayer::new("g", 4, 3, &mut rng);
        for p in gru.params_mut() {
            p.value.fill(0.0);
        }
        let h_prev = vec![0.8, -0.4, 0.2, 1.0];
        let h = gru.step(&[0.3, 0.1, -0.2], &h_prev).unwrap();
        // z = σ(0) = 0.5, h̃ = tanh(0) = 0, so h = 0.5·h_prev.
        for (got, want) in h.iter().zip(&h_prev) {
            assert!((got - 0.5 * want).abs() < 1e-15);
        }
    }

    /// Independent straight-line transcription of the four step equations:
    /// the full z and r vectors first, then the candidate, then the blend.
    pub(crate) fn straight_line_step(
        gru: &GruLayer,
        x: &[f64],
        h_prev: &[f64],
    ) -> Vec<f64> {
        let n_h = gru.hidden_size();
        let n_x = gru.input_size();
        let at = |m: &Tensor, r: usize, c: usize| m.data()[r * m.shape()[1] + c];
        let sigma = |a: f64| 1.0 / (1.0 + (-a).exp());

        let mut z = vec![0.0; n_h];
        let mut r = vec![0.0; n_h];
        for j in 0..n_h {
            let mut a_z = 0.0;
            let mut a_r = 0.0;
            for k in 0..n_x {
                a_z += at(&gru.w_z.value, j, k) * x[k];
                a_r += at(&gru.w_r.value, j, k) * x[k];
            }
            for k in 0..n_h {
                a_z += at(&gru.u_z.value, j, k) * h_prev[k];
                a_r += at(&gru.u_r.value, j, k) * h_prev[k];
            }
            z[j] = sigma(a_z);
            r[j] = sigma(a_r);
        }
        let mut h = vec![0.0; n_h];
        for j in 0..n_h {
            let mut a_h = 0.0;
            for k in 0..n_x {
                a_h += at(&gru.w.value, j, k) * x[k];
            }
            for k in 0..n_h {
                a_h += at(&gru.u.value, j, k) * (r[k] * h_prev[k]);
            }
            h[j] = a_h.tanh() * (1.0 - z[j]) + z[j] * h_prev[j];
        }
        h
    }

    #[test]
    fn step_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let gru = GruLayer::new("g", 16, 8, &mut rng);
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h_prev: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = gru.step(&x, &h_prev).unwrap();
            let want = straight_line_step(&gru, &x, &h_prev);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn all_silence_with_zero_weights_stays_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut gru = GruLayer::new("g", 16, 8, &mut rng);
        for p in gru.params_mut() {
            p.value.fill(0.0);
        }
        let mut seq = Tensor::zeros(vec![16, 8]);
        for t in 0..16 {
            seq.data_mut()[t * 8] = 1.0; // silence index
        }
        let h = gru.sequence(&seq).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_length_is_hidden_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gru = GruLayer::new("g", 16, 8, &mut rng);
        let seq = random_seq(16, 8, &mut rng);
        assert_eq!(gru.sequence(&seq).unwrap().len(), 16);
    }

    #[test]
    fn permuting_timesteps_changes_the_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gru = GruLayer::new("g", 16, 8, &mut rng);
        let seq = random_seq(16, 8, &mut rng);
        let mut permuted = seq.clone();
        let n = 8;
        for t in 0..16 {
            let src = (t + 7) % 16;
            let row: Vec<f64> = seq.data()[src * n..(src + 1) * n].to_vec();
            permuted.data_mut()[t * n..(t + 1) * n].copy_from_slice(&row);
        }
        let a = gru.sequence(&seq).unwrap();
        let b = gru.sequence(&permuted).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn wrong_timestep_count_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gru = GruLayer::new("g", 16, 8, &mut rng);
        let seq = random_seq(12, 8, &mut rng);
        assert!(gru.sequence(&seq).is_err());
    }

    #[test]
    fn sequence_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gru = GruLayer::new("g", 6, 4, &mut rng);
        let seq = random_seq(16, 4, &mut rng);

        // Loss: squared norm of the final hidden state.
        let loss_of = |g: &GruLayer, s: &Tensor| -> f64 {
            g.sequence(s).unwrap().iter().map(|v| v * v).sum()
        };

        let (h, caches) = gru.sequence_cached(&seq).unwrap();
        let grad_h: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
        let mut grads: Vec<Tensor> = gru
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.value.shape().to_vec()))
            .collect();
        let gseq = gru
            .sequence_backward(&seq, &caches, &grad_h, &mut grads)
            .unwrap();

        for (i, p) in gru.params().iter().enumerate() {
            let numeric = finite_diff_grad(
                &mut |t: &Tensor| {
                    let mut g2 = gru.clone();
                    g2.params_mut()[i].value = t.clone();
                    Ok(loss_of(&g2, &seq))
                },
                &p.value,
                1e-5,
            )
            .unwrap();
            assert!(
                max_rel_err(&grads[i], &numeric) <= 1e-4,
                "parameter {}",
                p.name
            );
        }
        let nseq = finite_diff_grad(&mut |t: &Tensor| Ok(loss_of(&gru, t)), &seq, 1e-5).unwrap();
        assert!(max_rel_err(&gseq, &nseq) <= 1e-4);
    }
}

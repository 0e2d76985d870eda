//! Dense and 3-D convolution layers with explicit forward/backward passes.
//!
//! Backward passes never mutate the layer: gradients accumulate into caller
//! supplied buffers, which keeps forward/backward pure and lets batches run
//! in parallel with deterministic in-order reduction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{affine, affine_backward, Parameter, Tensor};

/// Fully connected layer: `y = W·x + b`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(name: &str, out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let w: Vec<f64> = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Dense {
            weight: Parameter::new(
                format!("{name}.weight"),
                Tensor::new(vec![out_dim, in_dim], w).unwrap(),
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(vec![out_dim])),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        affine(&self.weight.value, &self.bias.value, x)
    }

    /// Accumulates into `grads[0]` (weight) and `grads[1]` (bias); returns
    /// the gradient with respect to the input.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut [Tensor]) -> Result<Vec<f64>> {
        let (gw, gb) = match grads {
            [gw, gb] => (gw, gb),
            _ => {
                return Err(Error::Model("Dense::backward expects 2 grad buffers".into()));
            }
        };
        affine_backward(&self.weight.value, x, grad_out, gw, gb)
    }

    pub const PARAMS: usize = 2;

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Valid (no padding) 3-D cross-correlation with per-axis strides.
#[derive(Clone, Debug)]
pub struct Conv3d {
    /// out_ch × in_ch × kt × kh × kw.
    pub kernel: Parameter,
    pub bias: Parameter,
    pub stride: (usize, usize, usize),
}

impl Conv3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        out_ch: usize,
        in_ch: usize,
        kernel: (usize, usize, usize),
        stride: (usize, usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let (kt, kh, kw) = kernel;
        let fan_in = in_ch * kt * kh * kw;
        let bound = (1.0 / fan_in as f64).sqrt();
        let k: Vec<f64> = (0..out_ch * fan_in)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Conv3d {
            kernel: Parameter::new(
                format!("{name}.kernel"),
                Tensor::new(vec![out_ch, in_ch, kt, kh, kw], k).unwrap(),
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(vec![out_ch])),
            stride,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.value.shape()[0]
    }

    /// Output shape for an input of shape in_ch × T × H × W.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let ks = self.kernel.value.shape();
        if input.len() != 4 || input[0] != ks[1] {
            return Err(Error::ShapeMismatch {
                context: "Conv3d",
                expected: format!("{} input channels", ks[1]),
                actual: format!("{input:?}"),
            });
        }
        let (st, sh, sw) = self.stride;
        if input[1] < ks[2] || input[2] < ks[3] || input[3] < ks[4] {
            return Err(Error::ShapeMismatch {
                context: "Conv3d",
                expected: format!("input at least {}x{}x{}", ks[2], ks[3], ks[4]),
                actual: format!("{}x{}x{}", input[1], input[2], input[3]),
            });
        }
        Ok(vec![
            ks[0],
            (input[1] - ks[2]) / st + 1,
            (input[2] - ks[3]) / sh + 1,
            (input[3] - ks[4]) / sw + 1,
        ])
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(x.shape())?;
        let ks = self.kernel.value.shape();
        let (out_ch, in_ch, kt, kh, kw) = (ks[0], ks[1], ks[2], ks[3], ks[4]);
        let (xt, xh, xw) = (x.shape()[1], x.shape()[2], x.shape()[3]);
        let (ot, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
        let (st, sh, sw) = self.stride;
        let xd = x.data();
        let kd = self.kernel.value.data();
        let bd = self.bias.value.data();

        let mut out = vec![0.0; out_ch * ot * oh * ow];
        for o in 0..out_ch {
            let k_base = o * in_ch * kt * kh * kw;
            for t in 0..ot {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = bd[o];
                        for i in 0..in_ch {
                            for dt in 0..kt {
                                let t_in = t * st + dt;
                                for dy in 0..kh {
                                    let y_in = y * sh + dy;
                                    let x_row = &xd[((i * xt + t_in) * xh + y_in) * xw
                                        + xo * sw
                                        ..((i * xt + t_in) * xh + y_in) * xw + xo * sw + kw];
                                    let k_row = &kd[k_base + ((i * kt + dt) * kh + dy) * kw
                                        ..k_base + ((i * kt + dt) * kh + dy) * kw + kw];
                                    for (xv, kv) in x_row.iter().zip(k_row) {
                                        acc += xv * kv;
                                    }
                                }
                            }
                        }
                        out[((o * ot + t) * oh + y) * ow + xo] = acc;
                    }
                }
            }
        }
        Tensor::new(out_shape, out)
    }

    /// Accumulates kernel/bias gradients into `grads[0]`/`grads[1]`; returns
    /// the input gradient when `need_input_grad` is set (the first layer of
    /// an encoder can skip it since clips are data, not parameters).
    pub fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        grads: &mut [Tensor],
        need_input_grad: bool,
    ) -> Result<Option<Tensor>> {
        let out_shape = self.output_shape(x.shape())?;
        if grad_out.shape() != out_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "Conv3d::backward",
                expected: format!("{out_shape:?}"),
                actual: format!("{:?}", grad_out.shape()),
            });
        }
        let ks = self.kernel.value.shape();
        let (out_ch, in_ch, kt, kh, kw) = (ks[0], ks[1], ks[2], ks[3], ks[4]);
        let (xt, xh, xw) = (x.shape()[1], x.shape()[2], x.shape()[3]);
        let (ot, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
        let (st, sh, sw) = self.stride;
        let xd = x.data();
        let kd = self.kernel.value.data();
        let god = grad_out.data();

        let (gk_buf, gb_buf) = match grads {
            [gk, gb] => (gk, gb),
            _ => {
                return Err(Error::Model(
                    "Conv3d::backward expects 2 grad buffers".into(),
                ))
            }
        };
        let mut gx = if need_input_grad {
            Some(vec![0.0; xd.len()])
        } else {
            None
        };

        let gk = gk_buf.data_mut();
        let gb = gb_buf.data_mut();
        for o in 0..out_ch {
            let k_base = o * in_ch * kt * kh * kw;
            for t in 0..ot {
                for y in 0..oh {
                    for xo in 0..ow {
                        let go = god[((o * ot + t) * oh + y) * ow + xo];
                        gb[o] += go;
                        for i in 0..in_ch {
                            for dt in 0..kt {
                                let t_in = t * st + dt;
                                for dy in 0..kh {
                                    let y_in = y * sh + dy;
                                    let x_base = ((i * xt + t_in) * xh + y_in) * xw + xo * sw;
                                    let k_off = k_base + ((i * kt + dt) * kh + dy) * kw;
                                    for dx in 0..kw {
                                        gk[k_off + dx] += go * xd[x_base + dx];
                                    }
                                    if let Some(gx) = gx.as_mut() {
                                        for dx in 0..kw {
                                            gx[x_base + dx] += go * kd[k_off + dx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(match gx {
            Some(g) => Some(Tensor::new(x.shape().to_vec(), g)?),
            None => None,
        })
    }

    pub const PARAMS: usize = 2;

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.kernel, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

/// Element-wise tanh with its backward pass (uses the cached outputs).
pub fn tanh_forward(x: &Tensor) -> Tensor {
    let mut t = x.clone();
    t.data_mut().iter_mut().for_each(|v| *v = v.tanh());
    t
}

pub fn tanh_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &ov) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= 1.0 - ov * ov;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_rel_err};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv3d::new("c", 1, 1, (1, 1, 1), (1, 1, 1), &mut rng);
        conv.kernel.value.data_mut()[0] = 1.0;
        conv.bias.value.data_mut()[0] = 0.0;
        let x = random_tensor(vec![1, 2, 3, 3], &mut rng);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn all_ones_3x3x3_kernel_sums_to_27() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv3d::new("c", 1, 1, (3, 3, 3), (1, 1, 1), &mut rng);
        conv.kernel.value.fill(1.0);
        conv.bias.value.fill(0.0);
        let x = Tensor::filled(vec![1, 3, 3, 3], 1.0);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert!((y.data()[0] - 27.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv3d::new("c", 2, 3, (2, 2, 2), (1, 1, 1), &mut rng);
        let x = random_tensor(vec![2, 4, 4, 4], &mut rng); // wrong channels
        assert!(conv.forward(&x).is_err());
        let small = random_tensor(vec![3, 1, 4, 4], &mut rng); // too shallow
        assert!(conv.forward(&small).is_err());
    }

    #[test]
    fn conv3d_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv3d::new("c", 2, 2, (2, 3, 3), (1, 2, 2), &mut rng);
        let x = random_tensor(vec![2, 4, 6, 6], &mut rng);

        // Scalar objective: squared sum of outputs.
        let loss_for = |conv: &Conv3d, x: &Tensor| -> f64 {
            conv.forward(x).unwrap().data().iter().map(|v| v * v).sum()
        };

        let y = conv.forward(&x).unwrap();
        let grad_out = Tensor::new(
            y.shape().to_vec(),
            y.data().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let mut grads = vec![
            Tensor::zeros(conv.kernel.value.shape().to_vec()),
            Tensor::zeros(conv.bias.value.shape().to_vec()),
        ];
        let gx = conv
            .backward(&x, &grad_out, &mut grads, true)
            .unwrap()
            .unwrap();

        let nk = finite_diff_grad(
            &mut |t: &Tensor| {
                let mut c = conv.clone();
                c.kernel.value = t.clone();
                Ok(loss_for(&c, &x))
            },
            &conv.kernel.value,
            1e-5,
        )
        .unwrap();
        let nb = finite_diff_grad(
            &mut |t: &Tensor| {
                let mut c = conv.clone();
                c.bias.value = t.clone();
                Ok(loss_for(&c, &x))
            },
            &conv.bias.value,
            1e-5,
        )
        .unwrap();
        let nx = finite_diff_grad(&mut |t: &Tensor| Ok(loss_for(&conv, t)), &x, 1e-5).unwrap();

        assert!(max_rel_err(&grads[0], &nk) <= 1e-4);
        assert!(max_rel_err(&grads[1], &nb) <= 1e-4);
        assert!(max_rel_err(&gx, &nx) <= 1e-4);
    }

    #[test]
    fn strided_output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = Conv3d::new("c", 4, 3, (2, 8, 8), (2, 8, 8), &mut rng);
        let shape = conv.output_shape(&[3, 16, 224, 224]).unwrap();
        assert_eq!(shape, vec![4, 8, 28, 28]);
    }
}

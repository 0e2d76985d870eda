//! Central finite-difference gradient estimation.
//!
//! This is the verification oracle for every differentiable layer in the
//! crate: analytic backward passes are compared against it in tests.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Central-difference gradient of a scalar function at `x`.
pub fn finite_diff_grad(
    f: &mut dyn FnMut(&Tensor) -> Result<f64>,
    x: &Tensor,
    eps: f64,
) -> Result<Tensor> {
    if eps <= 0.0 {
        return Err(Error::NonFinite("finite_diff_grad eps must be > 0".into()));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape().to_vec());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let f_plus = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let f_minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite_diff_grad objective at component {i}"
            )));
        }
        grad.data_mut()[i] = (f_plus - f_minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Worst relative component error between two gradients, with the denominator
/// floored at 1 so near-zero components compare absolutely.
pub fn max_rel_err(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_rel_err shape mismatch");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

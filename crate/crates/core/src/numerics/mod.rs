//! Dense tensor arithmetic and the training primitives built on it.
//!
//! Everything is 64-bit floating point. Differentiation is per-layer: each
//! operation exposes an explicit forward and backward rather than a recorded
//! tape, since the model graphs in this crate are small and static.

mod adam;
mod gradcheck;
mod ops;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, max_rel_err};
pub use ops::{affine, affine_backward, sigmoid, softmax, softmax_cross_entropy};
pub use tensor::{Parameter, Tensor};

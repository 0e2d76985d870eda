//! Bias-corrected Adam updates over named parameters.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::{Parameter, Tensor};

/// Adam hyperparameters. Only the learning rate varies between experiments;
/// the remaining coefficients are the optimizer's usual defaults.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter name plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    moments: HashMap<String, (Tensor, Tensor)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: HashMap::new(),
        }
    }
}

/// Apply one bias-corrected Adam update to every parameter, then clear the
/// gradients. Parameters are matched to their moment buffers by name.
pub fn adam_step(params: &mut [&mut Parameter], state: &mut AdamState) -> Result<()> {
    // A duplicated name would silently share moments between two parameters.
    let mut seen = std::collections::HashSet::new();
    for p in params.iter() {
        if !seen.insert(p.name.as_str()) {
            return Err(Error::Model(format!("duplicate parameter name {}", p.name)));
        }
        if p.grad.data().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of parameter {}", p.name)));
        }
    }

    state.step += 1;
    let t = state.step;
    let cfg = state.config;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);

    for p in params.iter_mut() {
        let (m, v) = state
            .moments
            .entry(p.name.clone())
            .or_insert_with(|| {
                (
                    Tensor::zeros(p.value.shape().to_vec()),
                    Tensor::zeros(p.value.shape().to_vec()),
                )
            });
        if m.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch {
                context: "adam_step",
                expected: format!("{:?}", m.shape()),
                actual: format!("{:?} for parameter {}", p.value.shape(), p.name),
            });
        }
        let md = m.data_mut();
        let vd = v.data_mut();
        let grads = p.grad.data();
        let values = p.value.data_mut();
        for i in 0..values.len() {
            let g = grads[i];
            md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * g;
            vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        p.zero_grad();
    }
    Ok(())
}

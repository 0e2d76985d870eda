//! Mini-batch cross-entropy training with Adam.
//!
//! Samples in a batch are evaluated in parallel; their gradients are reduced
//! in index order before the single Adam step, so results are bit-identical
//! to serial execution for a fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::model::{FusionModel, ModalityData};
use crate::numerics::{adam_step, AdamConfig, AdamState, Tensor};

/// Training hyperparameters.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            learning_rate: 0.05,
            epochs: 21,
            seed: 0,
        }
    }
}

/// One labeled sample: inputs aligned with the model's modalities.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub inputs: Vec<ModalityData>,
    pub label: u8,
}

/// A training set. Implementations may materialize samples lazily (clip
/// tensors are large); `sample` must be pure so batches can run in parallel.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sample(&self, idx: usize) -> Result<TrainSample>;
}

impl SampleSource for Vec<TrainSample> {
    fn len(&self) -> usize {
        self.len()
    }
    fn sample(&self, idx: usize) -> Result<TrainSample> {
        Ok(self[idx].clone())
    }
}

/// Train for exactly `cfg.epochs` epochs; returns mean loss per epoch.
pub fn train(
    model: &mut FusionModel,
    data: &dyn SampleSource,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Model("training set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Model("batch size and epochs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(AdamConfig::new(cfg.learning_rate));
    let mut history = Vec::with_capacity(cfg.epochs);

    let n = data.len();
    let mut indices: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let results: Result<Vec<(f64, Vec<Tensor>)>> = batch
                .par_iter()
                .map(|&i| {
                    let s = data.sample(i)?;
                    model.loss_and_grads(&s.inputs, s.label)
                })
                .collect();
            let results = results?;

            let batch_loss: f64 = results.iter().map(|(l, _)| l).sum();
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch} (batch of {})",
                    batch.len()
                )));
            }
            epoch_loss += batch_loss;

            // In-order reduction, then mean over the batch.
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.parameters_mut();
            for (_, grads) in &results {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pg, gv) in p.grad.data_mut().iter_mut().zip(g.data()) {
                        *pg += gv * scale;
                    }
                }
            }
            adam_step(&mut params, &mut adam)?;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

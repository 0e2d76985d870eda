//! The fusion model: per-modality branches, optional attention gating, and
//! the dense classifier head over the concatenated embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::SpectrogramClip;
use crate::diarization::HotVectorSequence;
use crate::error::{Error, Result};
use crate::fusion::attention::{attention_backward, fuse};
use crate::fusion::encoder::{ClipEncoder, EncoderCache, EncoderGeometry};
use crate::fusion::gru::{GruLayer, GruStepCache};
use crate::fusion::layers::{tanh_backward, tanh_forward, Dense};
use crate::numerics::{softmax, softmax_cross_entropy, Parameter, Tensor};
use crate::video::{FlowClip, FrameClip};

/// Which signal a branch consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModalityKind {
    VideoRgb,
    VideoFlow,
    AudioSpectrogram,
    /// Diarization hot vectors of the given dimension, fed through a GRU.
    HotVector { dim: usize },
    /// Precomputed embedding of the given dimension, passed straight through.
    Embedding { dim: usize },
}

impl ModalityKind {
    pub fn token(&self) -> &'static str {
        match self {
            ModalityKind::VideoRgb => "rgb",
            ModalityKind::VideoFlow => "of",
            ModalityKind::AudioSpectrogram => "audio",
            ModalityKind::HotVector { .. } => "pybk",
            ModalityKind::Embedding { .. } => "emb",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModalityConfig {
    pub kind: ModalityKind,
    /// Output embedding size of this branch (the GRU hidden size for the
    /// hot-vector path; ignored for passthrough embeddings).
    pub embedding: usize,
    pub geometry: Option<EncoderGeometry>,
}

impl ModalityConfig {
    pub fn new(kind: ModalityKind, embedding: usize) -> Self {
        ModalityConfig {
            kind,
            embedding,
            geometry: None,
        }
    }

    fn output_dim(&self) -> usize {
        match self.kind {
            ModalityKind::Embedding { dim } => dim,
            _ => self.embedding,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub modalities: Vec<ModalityConfig>,
    pub attention: bool,
    /// Dense pre-projection before the softmax gate (off by default; the
    /// gate itself is parameter-free).
    pub attention_preproject: bool,
    pub head_hidden: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(modalities: Vec<ModalityConfig>, attention: bool, seed: u64) -> Self {
        ModelConfig {
            modalities,
            attention,
            attention_preproject: false,
            head_hidden: 32,
            seed,
        }
    }
}

/// One sample's input for a single branch.
#[derive(Clone, Debug)]
pub enum ModalityData {
    Clip(Tensor),
    Flow(Tensor),
    Spectrogram(Tensor),
    Hot(Tensor),
    Embedding(Vec<f64>),
}

impl ModalityData {
    pub fn from_frame_clip(clip: FrameClip) -> Self {
        ModalityData::Clip(clip.tensor)
    }

    pub fn from_flow_clip(clip: FlowClip) -> Self {
        ModalityData::Flow(clip.tensor)
    }

    /// Spectrogram as a 1 × 1 × frames × bins tensor.
    pub fn from_spectrogram(spec: &SpectrogramClip) -> Result<Self> {
        Ok(ModalityData::Spectrogram(Tensor::new(
            vec![1, 1, spec.frames, spec.bins],
            spec.data.clone(),
        )?))
    }

    pub fn from_hot(seq: &HotVectorSequence) -> Result<Self> {
        Ok(ModalityData::Hot(Tensor::new(
            vec![seq.frames(), seq.dim()],
            seq.data().to_vec(),
        )?))
    }
}

#[derive(Clone, Debug)]
enum Branch {
    Encoder(ClipEncoder),
    Gru(GruLayer),
    Identity { dim: usize },
}

enum BranchCache {
    Encoder(EncoderCache),
    Gru(Vec<GruStepCache>),
    Identity,
}

/// Two dense layers with tanh in between and softmax on top.
#[derive(Clone, Debug)]
pub struct ClassifierHead {
    pub fc1: Dense,
    pub fc2: Dense,
}

impl ClassifierHead {
    pub const PARAMS: usize = 4;

    fn forward(&self, fused: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let h1 = tanh_forward(&Tensor::from_vec(self.fc1.forward(fused)?));
        let logits = self.fc2.forward(h1.data())?;
        Ok((logits, h1.into_data()))
    }

    /// Probabilities over {non-speaker, speaker}.
    pub fn classify(&self, fused: &[f64]) -> Result<Vec<f64>> {
        let (logits, _) = self.forward(fused)?;
        softmax(&logits)
    }

    fn backward(
        &self,
        fused: &[f64],
        h1: &[f64],
        grad_logits: &[f64],
        grads: &mut [Tensor],
    ) -> Result<Vec<f64>> {
        let (g1, g2) = grads.split_at_mut(2);
        let grad_h1 = self.fc2.backward(h1, grad_logits, g2)?;
        let h1_t = Tensor::from_vec(h1.to_vec());
        let grad_pre = tanh_backward(&h1_t, &Tensor::from_vec(grad_h1));
        self.fc1.backward(fused, grad_pre.data(), g1)
    }
}

/// The complete detector: branches, optional per-modality gating, classifier.
#[derive(Clone, Debug)]
pub struct FusionModel {
    config: ModelConfig,
    branches: Vec<Branch>,
    pre_proj: Vec<Option<Dense>>,
    head: ClassifierHead,
}

/// Forward intermediates for one sample.
pub struct ModelCache {
    branch_caches: Vec<BranchCache>,
    /// Raw branch outputs.
    embeddings: Vec<Vec<f64>>,
    /// Post-pre-projection vectors (same as `embeddings` when no projection).
    gate_inputs: Vec<Vec<f64>>,
    /// Softmax of each gate input, when attention is on.
    gate_softmax: Option<Vec<Vec<f64>>>,
    fused: Vec<f64>,
    offsets: Vec<usize>,
    head_h1: Vec<f64>,
    pub logits: Vec<f64>,
}

impl FusionModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.modalities.is_empty() {
            return Err(Error::Model("model needs at least one modality".into()));
        }
        let audio_paths = config
            .modalities
            .iter()
            .filter(|m| {
                matches!(
                    m.kind,
                    ModalityKind::AudioSpectrogram | ModalityKind::HotVector { .. }
                )
            })
            .count();
        if audio_paths > 1 {
            return Err(Error::Model(
                "at most one audio path (spectrogram or hot vectors) may be active".into(),
            ));
        }
        for m in &config.modalities {
            if m.output_dim() == 0 {
                return Err(Error::Model("embedding sizes must be positive".into()));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut branches = Vec::new();
        let mut pre_proj = Vec::new();
        for (i, m) in config.modalities.iter().enumerate() {
            let name = format!("m{i}.{}", m.kind.token());
            let branch = match m.kind {
                ModalityKind::VideoRgb => Branch::Encoder(ClipEncoder::new(
                    &name,
                    3,
                    m.embedding,
                    &m.geometry.unwrap_or_else(EncoderGeometry::video),
                    &mut rng,
                )),
                ModalityKind::VideoFlow => Branch::Encoder(ClipEncoder::new(
                    &name,
                    1,
                    m.embedding,
                    &m.geometry.unwrap_or_else(EncoderGeometry::video),
                    &mut rng,
                )),
                ModalityKind::AudioSpectrogram => Branch::Encoder(ClipEncoder::new(
                    &name,
                    1,
                    m.embedding,
                    &m.geometry.unwrap_or_else(EncoderGeometry::spectrogram),
                    &mut rng,
                )),
                ModalityKind::HotVector { dim } => {
                    Branch::Gru(GruLayer::new(&name, m.embedding, dim, &mut rng))
                }
                ModalityKind::Embedding { dim } => Branch::Identity { dim },
            };
            branches.push(branch);
            pre_proj.push(if config.attention && config.attention_preproject {
                let dim = m.output_dim();
                Some(Dense::new(&format!("{name}.pre"), dim, dim, &mut rng))
            } else {
                None
            });
        }
        let fused_dim: usize = config.modalities.iter().map(|m| m.output_dim()).sum();
        let head = ClassifierHead {
            fc1: Dense::new("head.fc1", config.head_hidden, fused_dim, &mut rng),
            fc2: Dense::new("head.fc2", 2, config.head_hidden, &mut rng),
        };
        Ok(FusionModel {
            config,
            branches,
            pre_proj,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    /// Total concatenated embedding size.
    pub fn fused_dim(&self) -> usize {
        self.config.modalities.iter().map(|m| m.output_dim()).sum()
    }

    pub fn forward_cached(&self, inputs: &[ModalityData]) -> Result<ModelCache> {
        if inputs.len() != self.branches.len() {
            return Err(Error::Model(format!(
                "model has {} modalities, sample has {}",
                self.branches.len(),
                inputs.len()
            )));
        }
        let mut embeddings = Vec::with_capacity(inputs.len());
        let mut branch_caches = Vec::with_capacity(inputs.len());
        for (i, (branch, data)) in self.branches.iter().zip(inputs).enumerate() {
            let (emb, cache) = self.branch_forward(i, branch, data)?;
            embeddings.push(emb);
            branch_caches.push(cache);
        }

        let mut gate_inputs = Vec::with_capacity(embeddings.len());
        for (emb, pp) in embeddings.iter().zip(&self.pre_proj) {
            gate_inputs.push(match pp {
                Some(dense) => dense.forward(emb)?,
                None => emb.clone(),
            });
        }

        let gate_softmax = if self.config.attention {
            Some(
                gate_inputs
                    .iter()
                    .map(|x| softmax(x))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let (fused, offsets) = fuse(&gate_inputs, self.config.attention)?;
        let (logits, head_h1) = self.head.forward(&fused)?;
        Ok(ModelCache {
            branch_caches,
            embeddings,
            gate_inputs,
            gate_softmax,
            fused,
            offsets,
            head_h1,
            logits,
        })
    }

    /// Class probabilities {non-speaker, speaker} for one sample.
    pub fn predict(&self, inputs: &[ModalityData]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(inputs)?;
        softmax(&cache.logits)
    }

    /// P(speaker).
    pub fn speaker_score(&self, inputs: &[ModalityData]) -> Result<f64> {
        Ok(self.predict(inputs)?[1])
    }

    /// Cross-entropy loss and the full parameter gradient for one sample.
    /// Pure in the model, so batches can run in parallel.
    pub fn loss_and_grads(
        &self,
        inputs: &[ModalityData],
        label: u8,
    ) -> Result<(f64, Vec<Tensor>)> {
        if label > 1 {
            return Err(Error::Model(format!("label {label} must be 0 or 1")));
        }
        let cache = self.forward_cached(inputs)?;
        let (loss, grad_logits) = softmax_cross_entropy(&cache.logits, label as usize)?;
        let mut grads: Vec<Tensor> = self
            .parameters()
            .iter()
            .map(|p| Tensor::zeros(p.value.shape().to_vec()))
            .collect();

        let (head_range, branch_ranges) = self.param_layout();
        let grad_fused = self.head.backward(
            &cache.fused,
            &cache.head_h1,
            &grad_logits,
            &mut grads[head_range.clone()],
        )?;

        for (i, branch) in self.branches.iter().enumerate() {
            let start = cache.offsets[i];
            let end = cache
                .offsets
                .get(i + 1)
                .copied()
                .unwrap_or(cache.fused.len());
            let grad_slice = &grad_fused[start..end];

            let grad_gate_input = match &cache.gate_softmax {
                Some(softmaxes) => {
                    attention_backward(&cache.gate_inputs[i], &softmaxes[i], grad_slice)
                }
                None => grad_slice.to_vec(),
            };

            let (branch_r, pre_r) = &branch_ranges[i];
            let grad_emb = match &self.pre_proj[i] {
                Some(dense) => dense.backward(
                    &cache.embeddings[i],
                    &grad_gate_input,
                    &mut grads[pre_r.clone()],
                )?,
                None => grad_gate_input,
            };

            match (branch, &cache.branch_caches[i], &inputs[i]) {
                (Branch::Encoder(enc), BranchCache::Encoder(ec), data) => {
                    let x = modality_tensor(data)?;
                    enc.backward(x, ec, &grad_emb, &mut grads[branch_r.clone()])?;
                }
                (Branch::Gru(gru), BranchCache::Gru(steps), ModalityData::Hot(seq)) => {
                    gru.sequence_backward(seq, steps, &grad_emb, &mut grads[branch_r.clone()])?;
                }
                (Branch::Identity { .. }, BranchCache::Identity, _) => {}
                _ => return Err(Error::Model("branch/cache mismatch".into())),
            }
        }
        Ok((loss, grads))
    }

    fn branch_forward(
        &self,
        index: usize,
        branch: &Branch,
        data: &ModalityData,
    ) -> Result<(Vec<f64>, BranchCache)> {
        match (branch, data) {
            (Branch::Encoder(enc), d @ (ModalityData::Clip(_) | ModalityData::Flow(_) | ModalityData::Spectrogram(_))) => {
                let (emb, cache) = enc.forward(modality_tensor(d)?)?;
                Ok((emb, BranchCache::Encoder(cache)))
            }
            (Branch::Gru(gru), ModalityData::Hot(seq)) => {
                let (h, steps) = gru.sequence_cached(seq)?;
                Ok((h, BranchCache::Gru(steps)))
            }
            (Branch::Identity { dim }, ModalityData::Embedding(v)) => {
                if v.len() != *dim {
                    return Err(Error::ShapeMismatch {
                        context: "FusionModel embedding input",
                        expected: format!("{dim}"),
                        actual: format!("{}", v.len()),
                    });
                }
                Ok((v.clone(), BranchCache::Identity))
            }
            _ => Err(Error::Model(format!(
                "modality {index} input does not match its configured kind"
            ))),
        }
    }

    /// Head parameter range and per-branch (branch, pre-projection) ranges
    /// within the flat parameter list.
    fn param_layout(
        &self,
    ) -> (
        std::ops::Range<usize>,
        Vec<(std::ops::Range<usize>, std::ops::Range<usize>)>,
    ) {
        let mut ranges = Vec::with_capacity(self.branches.len());
        let mut at = 0;
        for (branch, pp) in self.branches.iter().zip(&self.pre_proj) {
            let n = match branch {
                Branch::Encoder(_) => ClipEncoder::PARAMS,
                Branch::Gru(_) => GruLayer::PARAMS,
                Branch::Identity { .. } => 0,
            };
            let branch_range = at..at + n;
            at += n;
            let pre_n = if pp.is_some() { Dense::PARAMS } else { 0 };
            let pre_range = at..at + pre_n;
            at += pre_n;
            ranges.push((branch_range, pre_range));
        }
        (at..at + ClassifierHead::PARAMS, ranges)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        for (branch, pp) in self.branches.iter().zip(&self.pre_proj) {
            match branch {
                Branch::Encoder(e) => out.extend(e.params()),
                Branch::Gru(g) => out.extend(g.params()),
                Branch::Identity { .. } => {}
            }
            if let Some(d) = pp {
                out.extend(d.params());
            }
        }
        out.extend(self.head.fc1.params());
        out.extend(self.head.fc2.params());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        for (branch, pp) in self.branches.iter_mut().zip(&mut self.pre_proj) {
            match branch {
                Branch::Encoder(e) => out.extend(e.params_mut()),
                Branch::Gru(g) => out.extend(g.params_mut()),
                Branch::Identity { .. } => {}
            }
            if let Some(d) = pp {
                out.extend(d.params_mut());
            }
        }
        out.extend(self.head.fc1.params_mut());
        out.extend(self.head.fc2.params_mut());
        out
    }
}

fn modality_tensor(data: &ModalityData) -> Result<&Tensor> {
    match data {
        ModalityData::Clip(t) | ModalityData::Flow(t) | ModalityData::Spectrogram(t) => Ok(t),
        _ => Err(Error::Model("expected a tensor-backed modality".into())),
    }
}

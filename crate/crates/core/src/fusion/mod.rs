//! Differentiable encoders, fusion strategies, and the trainer.
//!
//! Two fusion modes share one architecture: naive concatenation of the
//! per-modality embeddings, or parameter-free softmax gating of each modality
//! before concatenation. Either a spectrogram encoder or a GRU over
//! diarization hot vectors supplies the audio branch; the two are never
//! active together.

mod attention;
mod checkpoint;
mod encoder;
mod gru;
mod layers;
mod model;
mod train;

pub use attention::{attention_apply, attention_backward, fuse};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use encoder::{ClipEncoder, EncoderGeometry};
pub use gru::{GruLayer, GruStepCache};
pub use layers::{Conv3d, Dense};
pub use model::{
    ClassifierHead, FusionModel, ModalityConfig, ModalityData, ModalityKind, ModelConfig,
};
pub use train::{train, SampleSource, TrainConfig, TrainSample};

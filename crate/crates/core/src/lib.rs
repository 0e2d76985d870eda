//! Multimodal active speaker detection toolkit.
//!
//! The crate is organized around the processing stages of a meeting pipeline:
//!
//! - [`numerics`]: dense `f64` tensors, differentiable primitives, Adam, and a
//!   finite-difference gradient checker that every learnable layer is verified
//!   against.
//! - [`audio`]: WAV ingestion, spectrogram clips, and MFCC extraction.
//! - [`diarization`]: unsupervised binary-key speaker diarization and the
//!   one-hot speaker-activity encoding consumed by the GRU branch.
//! - [`video`]: face-crop frame ingestion, 16-frame clip assembly, and dense
//!   Lucas-Kanade optical flow magnitudes.
//! - [`fusion`]: the differentiable encoders, GRU layer, attention gating,
//!   concatenation fusion, classifier head, and the mini-batch trainer.
//! - [`metrics`]: ROC/AUC (macro and micro) and diarization error rate with
//!   optimal speaker mapping.
//! - [`timeline`]: speaker-labeled segment lists plus RTTM I/O, shared by
//!   diarization and scoring.
//! - [`io`]: the binary feature-matrix dump format and CSV export.

pub mod audio;
pub mod diarization;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod timeline;
pub mod video;

pub use error::{Error, Result};

//! Audio ingestion and feature extraction.
//!
//! Two front ends share this module: spectrogram clips matched to the 0.64 s
//! video clip grid, and 60-coefficient MFCCs for the diarization back end.

mod mfcc;
mod spectrogram;
mod wav;

pub use mfcc::{log_mel, log_mel_with, mfcc, mfcc_with, LogMel, MfccConfig, MfccSequence};
pub use spectrogram::{
    normalize_clip, spectrogram, spectrogram_with, SpectrogramClip, SpectrogramConfig,
};
pub use wav::{read_wav, write_wav_i16};

use crate::error::{Error, Result};

/// Duration of one analysis clip in seconds, matching the 16-frame video clip
/// at 25 fps.
pub const CLIP_SECONDS: f64 = 0.64;

/// Mono audio in `[-1, 1]` at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        Ok(AudioSignal {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Split a signal into consecutive non-overlapping clips of `clip_seconds`;
/// the trailing remainder shorter than one clip is dropped.
pub fn slice_audio_clips(signal: &AudioSignal, clip_seconds: f64) -> Result<Vec<AudioSignal>> {
    let per_clip = (clip_seconds * signal.sample_rate as f64).round() as usize;
    if per_clip == 0 {
        return Err(Error::Audio("clip duration too short".into()));
    }
    if signal.samples.len() < per_clip {
        return Err(Error::Audio(format!(
            "signal of {:.3}s shorter than one {:.3}s clip",
            signal.duration(),
            clip_seconds
        )));
    }
    Ok(signal
        .samples
        .chunks_exact(per_clip)
        .map(|chunk| AudioSignal {
            samples: chunk.to_vec(),
            sample_rate: signal.sample_rate,
        })
        .collect())
}

//! Magnitude spectrogram clips with per-clip normalization.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

/// STFT settings for spectrogram clips. The bin count is fixed at 256: a
/// 512-point FFT with the DC bin dropped.
#[derive(Clone, Copy, Debug)]
pub struct SpectrogramConfig {
    pub sample_rate: u32,
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub fft_size: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            sample_rate: 16_000,
            window_seconds: 0.025,
            hop_seconds: 0.010,
            fft_size: 512,
        }
    }
}

impl SpectrogramConfig {
    pub fn bins(&self) -> usize {
        self.fft_size / 2
    }
}

/// Frames × 256 magnitude matrix for one audio clip.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramClip {
    /// Row-major frames × bins.
    pub data: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub start_time: f64,
    pub normalized: bool,
}

impl SpectrogramClip {
    pub fn value(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }
}

/// Magnitude STFT of one clip: Hamming-windowed frames, zero-padded to the
/// FFT size, keeping bins `1..=256` (DC dropped). Output is not normalized.
pub fn spectrogram(clip: &AudioSignal) -> Result<SpectrogramClip> {
    spectrogram_with(&SpectrogramConfig::default(), clip)
}

pub fn spectrogram_with(cfg: &SpectrogramConfig, clip: &AudioSignal) -> Result<SpectrogramClip> {
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::Audio(format!(
            "clip at {} Hz, expected {} Hz",
            clip.sample_rate, cfg.sample_rate
        )));
    }
    let win = (cfg.window_seconds * cfg.sample_rate as f64).round() as usize;
    let hop = (cfg.hop_seconds * cfg.sample_rate as f64).round() as usize;
    if win == 0 || hop == 0 || win > cfg.fft_size {
        return Err(Error::Audio("invalid spectrogram configuration".into()));
    }
    if clip.samples.len() < win {
        return Err(Error::Audio(format!(
            "clip of {} samples shorter than one {win}-sample analysis window",
            clip.samples.len()
        )));
    }

    let n_frames = (clip.samples.len() - win) / hop + 1;
    let bins = cfg.bins();
    let window = hamming(win);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);

    let mut data = Vec::with_capacity(n_frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for f in 0..n_frames {
        let start = f * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < win {
                clip.samples[start + i] * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for bin in 1..=bins {
            data.push(buf[bin].norm());
        }
    }

    Ok(SpectrogramClip {
        data,
        frames: n_frames,
        bins,
        start_time: 0.0,
        normalized: false,
    })
}

/// Normalize a clip to global mean 0 and standard deviation 1. A clip with
/// vanishing variance comes back as all zeros instead of NaN.
pub fn normalize_clip(spec: &SpectrogramClip) -> SpectrogramClip {
    let n = spec.data.len() as f64;
    let mean = spec.data.iter().sum::<f64>() / n;
    let var = spec.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let data = if std < 1e-12 {
        vec![0.0; spec.data.len()]
    } else {
        spec.data.iter().map(|v| (v - mean) / std).collect()
    };
    SpectrogramClip {
        data,
        normalized: true,
        ..spec.clone()
    }
}

pub(crate) fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

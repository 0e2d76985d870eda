//! 60-coefficient MFCC extraction for the diarization front end.
//!
//! Per frame: pre-emphasis, Hamming window, power spectrum, a 60-channel
//! triangular mel filter bank spanning 0 Hz to Nyquist, log compression, and
//! an orthonormal DCT-II keeping all 60 coefficients.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::spectrogram::hamming;
use crate::audio::AudioSignal;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct MfccConfig {
    pub window_seconds: f64,
    pub shift_seconds: f64,
    pub mel_channels: usize,
    pub coefficients: usize,
    pub pre_emphasis: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_seconds: 0.25,
            shift_seconds: 0.10,
            mel_channels: 60,
            coefficients: 60,
            pre_emphasis: 0.97,
        }
    }
}

/// MFCC frames: row-major frames × coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccSequence {
    pub data: Vec<f64>,
    pub frames: usize,
    pub coefficients: usize,
    pub frame_shift: f64,
    pub frame_length: f64,
}

impl MfccSequence {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.coefficients..(i + 1) * self.coefficients]
    }

    /// Center time of frame `i` in seconds.
    pub fn frame_time(&self, i: usize) -> f64 {
        i as f64 * self.frame_shift + self.frame_length / 2.0
    }

    /// A sequence containing only the selected frames (used to slice
    /// per-segment features out of a meeting-level extraction).
    pub fn select(&self, indices: &[usize]) -> MfccSequence {
        let mut data = Vec::with_capacity(indices.len() * self.coefficients);
        for &i in indices {
            data.extend_from_slice(self.frame(i));
        }
        MfccSequence {
            data,
            frames: indices.len(),
            coefficients: self.coefficients,
            frame_shift: self.frame_shift,
            frame_length: self.frame_length,
        }
    }
}

pub fn mfcc(signal: &AudioSignal) -> Result<MfccSequence> {
    mfcc_with(&MfccConfig::default(), signal)
}

pub fn mfcc_with(cfg: &MfccConfig, signal: &AudioSignal) -> Result<MfccSequence> {
    let log_mel = log_mel_with(cfg, signal)?;
    let dct = dct_matrix(cfg.coefficients, cfg.mel_channels);
    let mut data = Vec::with_capacity(log_mel.frames * cfg.coefficients);
    for f in 0..log_mel.frames {
        let row = &log_mel.data[f * cfg.mel_channels..(f + 1) * cfg.mel_channels];
        for k in 0..cfg.coefficients {
            let basis = &dct[k * cfg.mel_channels..(k + 1) * cfg.mel_channels];
            data.push(basis.iter().zip(row).map(|(b, v)| b * v).sum());
        }
    }
    Ok(MfccSequence {
        data,
        frames: log_mel.frames,
        coefficients: cfg.coefficients,
        frame_shift: cfg.shift_seconds,
        frame_length: cfg.window_seconds,
    })
}

/// Log mel-filterbank energies: frames × mel channels, row-major.
#[derive(Clone, Debug)]
pub struct LogMel {
    pub data: Vec<f64>,
    pub frames: usize,
    pub channels: usize,
}

pub fn log_mel(signal: &AudioSignal) -> Result<LogMel> {
    log_mel_with(&MfccConfig::default(), signal)
}

pub fn log_mel_with(cfg: &MfccConfig, signal: &AudioSignal) -> Result<LogMel> {
    let sr = signal.sample_rate as f64;
    let win = (cfg.window_seconds * sr).round() as usize;
    let shift = (cfg.shift_seconds * sr).round() as usize;
    if signal.samples.len() < win {
        return Err(Error::Audio(format!(
            "signal of {:.3}s shorter than the {:.3}s analysis window",
            signal.duration(),
            cfg.window_seconds
        )));
    }
    let n_frames = (signal.samples.len() - win) / shift + 1;
    let fft_size = win.next_power_of_two();
    let n_bins = fft_size / 2 + 1;

    // Pre-emphasis over the whole signal, first sample left as-is.
    let mut emphasized = Vec::with_capacity(signal.samples.len());
    emphasized.push(signal.samples[0]);
    for i in 1..signal.samples.len() {
        emphasized.push(signal.samples[i] - cfg.pre_emphasis * signal.samples[i - 1]);
    }

    let window = hamming(win);
    let filters = mel_filter_bank(cfg.mel_channels, n_bins, fft_size, sr);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);

    let mut data = Vec::with_capacity(n_frames * cfg.mel_channels);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut power = vec![0.0; n_bins];
    for f in 0..n_frames {
        let start = f * shift;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < win {
                emphasized[start + i] * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (b, p) in power.iter_mut().enumerate() {
            *p = buf[b].norm_sqr();
        }
        for filter in &filters {
            let energy: f64 = filter.iter().map(|&(bin, w)| w * power[bin]).sum();
            data.push(energy.max(LOG_FLOOR).ln());
        }
    }
    Ok(LogMel {
        data,
        frames: n_frames,
        channels: cfg.mel_channels,
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over FFT bins, area-normalized so each filter's weights
/// sum to one. Returned as sparse `(bin, weight)` lists.
fn mel_filter_bank(
    channels: usize,
    n_bins: usize,
    fft_size: usize,
    sample_rate: f64,
) -> Vec<Vec<(usize, f64)>> {
    let nyquist = sample_rate / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let points: Vec<f64> = (0..channels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (channels + 1) as f64))
        .collect();
    let bin_hz = sample_rate / fft_size as f64;

    let mut filters = Vec::with_capacity(channels);
    for c in 0..channels {
        let (lo, center, hi) = (points[c], points[c + 1], points[c + 2]);
        let mut taps = Vec::new();
        for bin in 0..n_bins {
            let f = bin as f64 * bin_hz;
            let w = if f > lo && f < center {
                (f - lo) / (center - lo)
            } else if (f - center).abs() < 1e-12 {
                1.0
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            if w > 0.0 {
                taps.push((bin, w));
            }
        }
        let sum: f64 = taps.iter().map(|&(_, w)| w).sum();
        if sum > 0.0 {
            for tap in &mut taps {
                tap.1 /= sum;
            }
        }
        filters.push(taps);
    }
    filters
}

/// Orthonormal DCT-II basis, `coefficients × channels` row-major.
fn dct_matrix(coefficients: usize, channels: usize) -> Vec<f64> {
    let n = channels as f64;
    let mut m = Vec::with_capacity(coefficients * channels);
    for k in 0..coefficients {
        let scale = if k == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        };
        for j in 0..channels {
            m.push(scale * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n).cos());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seconds: f64, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (seconds * 16_000.0) as usize;
        AudioSignal::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect(), 16_000).unwrap()
    }

    #[test]
    fn one_second_gives_eight_frames() {
        let seq = mfcc(&noise(1.0, 1)).unwrap();
        assert_eq!(seq.frames, 8); // (1.0 - 0.25) / 0.1 + 1
        assert_eq!(seq.coefficients, 60);
        assert_eq!(seq.data.len(), 8 * 60);
    }

    #[test]
    fn frame_times_strictly_increase() {
        let seq = mfcc(&noise(1.5, 2)).unwrap();
        for i in 1..seq.frames {
            assert!(seq.frame_time(i) > seq.frame_time(i - 1));
        }
    }

    #[test]
    fn too_short_signal_errors() {
        assert!(mfcc(&noise(0.2, 3)).is_err());
    }

    /// Independent naive O(n²) DCT-II oracle, straight from the definition.
    fn naive_dct(row: &[f64], coefficients: usize) -> Vec<f64> {
        let n = row.len() as f64;
        (0..coefficients)
            .map(|k| {
                let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                let mut acc = 0.0;
                for (j, &v) in row.iter().enumerate() {
                    acc += v
                        * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / row.len() as f64)
                            .cos();
                }
                scale * acc
            })
            .collect()
    }

    #[test]
    fn dct_stage_matches_naive_oracle() {
        let sig = noise(0.25, 4); // exactly one frame
        let lm = log_mel(&sig).unwrap();
        assert_eq!(lm.frames, 1);
        let seq = mfcc(&sig).unwrap();
        let expect = naive_dct(&lm.data[..60], 60);
        for (a, b) in seq.frame(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn amplitude_scaling_shifts_log_mel_by_log_c_squared() {
        let sig = noise(0.5, 5);
        let c = 3.0;
        let scaled = AudioSignal::new(
            sig.samples.iter().map(|v| v * c).collect(),
            sig.sample_rate,
        )
        .unwrap();
        let a = log_mel(&sig).unwrap();
        let b = log_mel(&scaled).unwrap();
        let shift = (c * c as f64).ln();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((y - x - shift).abs() < 1e-9, "{x} {y}");
        }
    }

    #[test]
    fn mfcc_is_deterministic() {
        let sig = noise(0.8, 6);
        assert_eq!(mfcc(&sig).unwrap(), mfcc(&sig).unwrap());
    }

    #[test]
    fn mel_filters_cover_all_channels() {
        let filters = mel_filter_bank(60, 2049, 4096, 16_000.0);
        assert_eq!(filters.len(), 60);
        for (i, f) in filters.iter().enumerate() {
            assert!(!f.is_empty(), "filter {i} has no taps");
            let sum: f64 = f.iter().map(|&(_, w)| w).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}

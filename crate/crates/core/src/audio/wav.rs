//! WAV ingestion (16-bit PCM and 32-bit float) and 16-bit PCM output.

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

/// Read a WAV file as mono: multichannel input is averaged, samples scaled
/// to `[-1, 1]`.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Audio(format!("{}: zero channels", path.display())));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (format, bits) => {
            return Err(Error::Audio(format!(
                "{}: unsupported encoding {format:?}/{bits}-bit (need 16-bit PCM or 32-bit float)",
                path.display()
            )))
        }
    };

    if interleaved.len() % channels != 0 {
        return Err(Error::Audio(format!(
            "{}: truncated sample data",
            path.display()
        )));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioSignal::new(samples, spec.sample_rate)
}

/// Write a mono signal as 16-bit PCM. Values are clamped to `[-1, 1]` and
/// rounded to the nearest integer sample.
pub fn write_wav_i16(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &v in &signal.samples {
        // Same 1/32768 scale as the reader, clamped into the i16 range.
        let q = (v.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let sig = AudioSignal::new(vec![0.0; 16_000], 16_000).unwrap();
        write_wav_i16(&path, &sig).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.samples.len(), 16_000);
        assert!(back.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stereo_opposite_channels_average_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        let half = (0.5f64 * 32768.0) as i16;
        for _ in 0..100 {
            w.write_sample(half).unwrap();
            w.write_sample(-half).unwrap();
        }
        w.finalize().unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples.len(), 100);
        assert!(back.samples.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn sine_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let n = 16_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin() * 0.9)
            .collect();
        let sig = AudioSignal::new(samples.clone(), 16_000).unwrap();
        write_wav_i16(&path, &sig).unwrap();
        let back = read_wav(&path).unwrap();
        let max_err = samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max round-trip error {max_err}");
    }

    #[test]
    fn float_wav_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for i in 0..64 {
            w.write_sample(i as f32 / 64.0).unwrap();
        }
        w.finalize().unwrap();
        let back = read_wav(&path).unwrap();
        assert!((back.samples[32] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn unsupported_bit_depth_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(1i32 << 20).unwrap();
        w.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported"));
    }

    #[test]
    fn truncated_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tr.wav");
        let sig = AudioSignal::new(vec![0.25; 1000], 16_000).unwrap();
        write_wav_i16(&path, &sig).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..30]).unwrap();
        assert!(read_wav(&path).is_err());
    }
}

//! Unsupervised binary-key speaker diarization.
//!
//! The pipeline: energy-based speech activity detection, uniform 1 s
//! sub-segmentation, MFCC extraction, KBM training, one binary key per
//! sub-segment, agglomerative clustering, and elbow selection of the cluster
//! count. Labels are assigned by first appearance (`spk0`, `spk1`, ...).

mod cluster;
mod hot;
mod kbm;
mod key;

pub use cluster::{ahc_cluster, elbow_select, ClusteringSolution};
pub use hot::{hot_encode, HotVectorSequence, HOT_FRAMES};
pub use kbm::{symmetric_kl, train_kbm, DiagGaussian, Kbm, KbmConfig};
pub use key::{binary_key, jaccard_distance, key_from_counts, BinaryKey, BIT_FRACTION};

use crate::audio::{mfcc_with, AudioSignal, MfccConfig};
use crate::error::{Error, Result};
use crate::timeline::{Segment, SpeakerTimeline};

/// Speech activity detection settings: frame log-energies are thresholded at
/// a meeting-level percentile, short gaps are bridged, and short segments
/// dropped.
#[derive(Clone, Copy, Debug)]
pub struct SadConfig {
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub percentile: f64,
    pub min_segment_seconds: f64,
    pub gap_merge_seconds: f64,
}

impl Default for SadConfig {
    fn default() -> Self {
        SadConfig {
            window_seconds: 0.025,
            hop_seconds: 0.010,
            percentile: 0.30,
            min_segment_seconds: 0.5,
            gap_merge_seconds: 0.3,
        }
    }
}

/// Full diarization settings.
#[derive(Clone, Copy, Debug)]
pub struct DiarizeConfig {
    pub sad: SadConfig,
    pub mfcc: MfccConfig,
    pub kbm: KbmConfig,
    pub top_gaussians: usize,
    pub init_clusters: usize,
    pub subsegment_seconds: f64,
    pub seed: u64,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        DiarizeConfig {
            sad: SadConfig::default(),
            mfcc: MfccConfig::default(),
            kbm: KbmConfig::default(),
            top_gaussians: 10,
            init_clusters: 12,
            subsegment_seconds: 1.0,
            seed: 0,
        }
    }
}

/// Detect speech regions by frame log-energy against the meeting's
/// percentile threshold.
pub fn detect_speech(signal: &AudioSignal, cfg: &SadConfig) -> Vec<(f64, f64)> {
    let sr = signal.sample_rate as f64;
    let win = (cfg.window_seconds * sr).round() as usize;
    let hop = (cfg.hop_seconds * sr).round() as usize;
    if signal.samples.len() < win || win == 0 || hop == 0 {
        return Vec::new();
    }
    let n_frames = (signal.samples.len() - win) / hop + 1;
    let energies: Vec<f64> = (0..n_frames)
        .map(|f| {
            let s = &signal.samples[f * hop..f * hop + win];
            let e = s.iter().map(|v| v * v).sum::<f64>() / win as f64;
            (e + 1e-12).ln()
        })
        .collect();

    let mut sorted = energies.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = sorted[((cfg.percentile * (n_frames - 1) as f64).floor() as usize)
        .min(n_frames - 1)];

    // Frame runs above threshold become segments.
    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for f in 0..=n_frames {
        let speech = f < n_frames && energies[f] > threshold;
        match (speech, run_start) {
            (true, None) => run_start = Some(f),
            (false, Some(s)) => {
                let start = s as f64 * cfg.hop_seconds;
                let end = (f - 1) as f64 * cfg.hop_seconds + cfg.window_seconds;
                segments.push((start, end));
                run_start = None;
            }
            _ => {}
        }
    }

    // Bridge short gaps, then drop short segments.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for seg in segments {
        match merged.last_mut() {
            Some(last) if seg.0 - last.1 < cfg.gap_merge_seconds => last.1 = seg.1,
            _ => merged.push(seg),
        }
    }
    merged
        .into_iter()
        .filter(|(s, e)| e - s >= cfg.min_segment_seconds)
        .collect()
}

/// Diarize one meeting into a speaker timeline. Non-speech is excluded;
/// labels are `spk0..spkK` ordered by first appearance. The KBM pool and
/// selection sizes scale down automatically on short meetings.
pub fn diarize(signal: &AudioSignal, cfg: &DiarizeConfig) -> Result<SpeakerTimeline> {
    let speech = detect_speech(signal, &cfg.sad);
    if speech.is_empty() {
        return Ok(SpeakerTimeline::empty());
    }

    let features = mfcc_with(&cfg.mfcc, signal)?;
    let in_speech = |t: f64| speech.iter().any(|&(s, e)| s <= t && t < e);
    let speech_frames: Vec<usize> = (0..features.frames)
        .filter(|&f| in_speech(features.frame_time(f)))
        .collect();
    if speech_frames.is_empty() {
        return Ok(SpeakerTimeline::empty());
    }

    let kbm_cfg = cfg
        .kbm
        .scaled_to_fit(speech_frames.len(), features.frame_shift)
        .ok_or_else(|| {
            Error::Diarization(format!(
                "insufficient speech for KBM training: {} frames detected, need at least \
                 {:.1}s of speech",
                speech_frames.len(),
                cfg.kbm.min_window_seconds * 9.0
            ))
        })?;
    let kbm = train_kbm(&features.select(&speech_frames), &kbm_cfg)?;

    // Uniform sub-segmentation of the speech regions.
    let mut subsegments: Vec<(f64, f64)> = Vec::new();
    for &(start, end) in &speech {
        let mut t = start;
        while t < end {
            let stop = (t + cfg.subsegment_seconds).min(end);
            if stop - t < 0.25 * cfg.subsegment_seconds {
                // Tiny remainder: extend the previous piece instead.
                if let Some(last) = subsegments.last_mut() {
                    last.1 = stop;
                } else {
                    subsegments.push((t, stop));
                }
            } else {
                subsegments.push((t, stop));
            }
            t = stop;
        }
    }

    let mut keys = Vec::new();
    let mut keyed_segments = Vec::new();
    for &(start, end) in &subsegments {
        let idx: Vec<usize> = (0..features.frames)
            .filter(|&f| {
                let t = features.frame_time(f);
                start <= t && t < end
            })
            .collect();
        if idx.is_empty() {
            continue;
        }
        keys.push(binary_key(&features.select(&idx), &kbm, cfg.top_gaussians)?);
        keyed_segments.push((start, end));
    }
    if keys.is_empty() {
        return Ok(SpeakerTimeline::empty());
    }

    let solutions = ahc_cluster(&keys, cfg.init_clusters, cfg.seed)?;
    let chosen = elbow_select(&solutions)?;

    // Map cluster ids to labels by first appearance time.
    let mut first_seen: Vec<(usize, f64)> = Vec::new();
    for (i, &(start, _)) in keyed_segments.iter().enumerate() {
        let c = chosen.assignments[i];
        if !first_seen.iter().any(|&(id, _)| id == c) {
            first_seen.push((c, start));
        }
    }
    first_seen.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let label_of = |cluster: usize| -> String {
        let rank = first_seen.iter().position(|&(id, _)| id == cluster).unwrap();
        format!("spk{rank}")
    };

    // Merge adjacent same-cluster sub-segments back together.
    let mut segments: Vec<Segment> = Vec::new();
    for (i, &(start, end)) in keyed_segments.iter().enumerate() {
        let label = label_of(chosen.assignments[i]);
        match segments.last_mut() {
            Some(last) if last.label == label && (start - last.end).abs() < 1e-9 => {
                last.end = end;
            }
            _ => segments.push(Segment::new(start, end, label)),
        }
    }
    SpeakerTimeline::new(segments)
}

//! One-hot encoding of the active diarization cluster per video frame.

use crate::error::{Error, Result};
use crate::timeline::SpeakerTimeline;

/// Number of frames a hot-vector sequence spans, matching the video clip.
pub const HOT_FRAMES: usize = 16;

/// 16 one-hot rows of dimension `dim`, one per frame time. Index 0 is
/// reserved for "no active speaker"; label `spkK` occupies index `K + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HotVectorSequence {
    data: Vec<f64>,
    dim: usize,
    frame_times: Vec<f64>,
}

impl HotVectorSequence {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        HOT_FRAMES
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Encode the speaker active at each of 16 frame times. When several labels
/// overlap a frame, the segment that started latest wins.
pub fn hot_encode(
    timeline: &SpeakerTimeline,
    frame_times: &[f64],
    dim: usize,
) -> Result<HotVectorSequence> {
    if frame_times.len() != HOT_FRAMES {
        return Err(Error::Diarization(format!(
            "hot_encode needs {HOT_FRAMES} frame times, got {}",
            frame_times.len()
        )));
    }
    if frame_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Diarization(
            "frame times must strictly increase".into(),
        ));
    }
    let order = label_order(timeline);
    let mut data = vec![0.0; HOT_FRAMES * dim];
    for (f, &t) in frame_times.iter().enumerate() {
        let active = timeline.active_at(t);
        let index = match active
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            None => 0,
            Some(&(label, _)) => {
                let k = label_index(label, &order);
                if k + 1 >= dim {
                    return Err(Error::Diarization(format!(
                        "label {label} needs hot index {} but dim is {dim}",
                        k + 1
                    )));
                }
                k + 1
            }
        };
        data[f * dim + index] = 1.0;
    }
    Ok(HotVectorSequence {
        data,
        dim,
        frame_times: frame_times.to_vec(),
    })
}

fn label_order(timeline: &SpeakerTimeline) -> Vec<String> {
    timeline.labels()
}

/// `spkK` → K; any other label falls back to its first-appearance rank.
fn label_index(label: &str, order: &[String]) -> usize {
    if let Some(rest) = label.strip_prefix("spk") {
        if let Ok(k) = rest.parse::<usize>() {
            return k;
        }
    }
    order.iter().position(|l| l == label).unwrap_or(0)
}

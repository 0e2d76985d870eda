//! Meeting datasets: aligned per-clip inputs for every participant, with
//! ground-truth labels when a reference timeline is available.
//!
//! Frames stay 8-bit in memory and clip tensors materialize per access; flow
//! magnitudes are extracted once per clip (in parallel) and cached as f32,
//! which keeps a 60 s four-participant meeting within a couple of GB.

use rayon::prelude::*;

use asd_core::audio::{
    normalize_clip, read_wav, slice_audio_clips, spectrogram, SpectrogramClip,
    CLIP_SECONDS,
};
use asd_core::diarization::{diarize, hot_encode, DiarizeConfig, HotVectorSequence};
use asd_core::error::Result as CoreResult;
use asd_core::fusion::{
    ModalityData, ModalityKind, SampleSource, TrainSample,
};
use asd_core::numerics::Tensor;
use asd_core::timeline::SpeakerTimeline;
use asd_core::video::{
    flow_magnitude_clip, BoundingBoxTrack, FrameStore, CLIP_FRAMES, CLIP_SIZE,
};

use crate::error::{CliError, CliResult};
use crate::manifest::MeetingManifest;

/// One meeting's aligned features.
pub struct MeetingData {
    pub meeting_id: String,
    pub fps: f64,
    pub participant_ids: Vec<String>,
    pub n_clips: usize,
    pub reference: Option<SpeakerTimeline>,
    modalities: Vec<ModalityKind>,
    /// 8-bit frames per participant; empty when no RGB branch is active.
    stores: Vec<FrameStore>,
    /// f32 flow-magnitude cache per participant per clip (16·224·224 each).
    flows: Vec<Vec<Vec<f32>>>,
    /// Normalized spectrogram per clip (meeting-level, not per participant).
    spectrograms: Vec<SpectrogramClip>,
    /// Hot-vector sequence per clip from the meeting's diarization.
    hots: Vec<HotVectorSequence>,
}

impl MeetingData {
    /// Load and align everything the configured modalities need.
    pub fn build(
        manifest: &MeetingManifest,
        modalities: &[ModalityKind],
        hot_dim: usize,
    ) -> CliResult<Self> {
        let needs_rgb = modalities.contains(&ModalityKind::VideoRgb);
        let needs_flow = modalities.contains(&ModalityKind::VideoFlow);
        let needs_audio = modalities.contains(&ModalityKind::AudioSpectrogram);
        let needs_hot = modalities
            .iter()
            .any(|m| matches!(m, ModalityKind::HotVector { .. }));

        let audio = read_wav(&manifest.audio)?;
        let audio_clip_count =
            (audio.duration() / CLIP_SECONDS).floor() as usize;

        // Frame streams, cropped/resized to clip resolution.
        let mut stores = Vec::with_capacity(manifest.participants.len());
        for stream in &manifest.participants {
            let boxes = match &stream.boxes_csv {
                Some(path) => Some(BoundingBoxTrack::read_csv(path)?),
                None => None,
            };
            let store =
                FrameStore::load_dir(&stream.id, &stream.frames_dir, boxes.as_ref(), CLIP_SIZE)?;
            // Streams must cover the same span as the audio to stay on one
            // clip grid.
            let expected = (audio.duration() * manifest.fps).round();
            if (store.len() as f64 - expected).abs() > 1.0 {
                return Err(CliError::data(format!(
                    "meeting {}: participant {} has {} frames, audio implies {:.0} \
                     (misalignment over 1 frame)",
                    manifest.meeting_id,
                    stream.id,
                    store.len(),
                    expected
                )));
            }
            stores.push(store);
        }

        let n_clips = stores
            .iter()
            .map(FrameStore::clip_count)
            .min()
            .unwrap_or(0)
            .min(audio_clip_count);
        if n_clips == 0 {
            return Err(CliError::data(format!(
                "meeting {}: no whole {CLIP_FRAMES}-frame clips available",
                manifest.meeting_id
            )));
        }

        let flows = if needs_flow {
            extract_flows(&stores, n_clips, manifest.fps)?
        } else {
            Vec::new()
        };

        let spectrograms = if needs_audio {
            let clips = slice_audio_clips(&audio, CLIP_SECONDS)?;
            clips
                .iter()
                .take(n_clips)
                .map(|c| Ok(normalize_clip(&spectrogram(c)?)))
                .collect::<CoreResult<Vec<_>>>()?
        } else {
            Vec::new()
        };

        let hots = if needs_hot {
            let timeline = diarize(&audio, &DiarizeConfig::default())?;
            let mut hots = Vec::with_capacity(n_clips);
            for k in 0..n_clips {
                let times: Vec<f64> = (0..CLIP_FRAMES)
                    .map(|f| (k * CLIP_FRAMES + f) as f64 / manifest.fps)
                    .collect();
                hots.push(hot_encode(&timeline, &times, hot_dim)?);
            }
            hots
        } else {
            Vec::new()
        };

        let reference = match &manifest.reference_rttm {
            Some(path) => Some(SpeakerTimeline::read_rttm(path)?),
            None => None,
        };

        Ok(MeetingData {
            meeting_id: manifest.meeting_id.clone(),
            fps: manifest.fps,
            participant_ids: manifest.participants.iter().map(|p| p.id.clone()).collect(),
            n_clips,
            reference,
            modalities: modalities.to_vec(),
            stores: if needs_rgb { stores } else { Vec::new() },
            flows,
            spectrograms,
            hots,
        })
    }

    pub fn participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn clip_window(&self, clip: usize) -> (f64, f64) {
        let start = (clip * CLIP_FRAMES) as f64 / self.fps;
        (start, start + CLIP_FRAMES as f64 / self.fps)
    }

    /// Ground-truth label for (participant, clip): speaking when the
    /// reference covers at least half the clip window.
    pub fn label(&self, participant: usize, clip: usize) -> Option<u8> {
        let reference = self.reference.as_ref()?;
        let (start, end) = self.clip_window(clip);
        let id = &self.participant_ids[participant];
        let covered: f64 = reference
            .segments()
            .iter()
            .filter(|s| s.label == *id)
            .map(|s| (s.end.min(end) - s.start.max(start)).max(0.0))
            .sum();
        Some(u8::from(covered >= (end - start) * 0.5))
    }

    /// Model inputs for one (participant, clip) pair, in modality order.
    pub fn inputs(&self, participant: usize, clip: usize) -> CoreResult<Vec<ModalityData>> {
        self.modalities
            .iter()
            .map(|kind| match kind {
                ModalityKind::VideoRgb => Ok(ModalityData::from_frame_clip(
                    self.stores[participant].clip(clip, self.fps)?,
                )),
                ModalityKind::VideoFlow => {
                    let data: Vec<f64> = self.flows[participant][clip]
                        .iter()
                        .map(|&v| v as f64)
                        .collect();
                    Ok(ModalityData::Flow(Tensor::new(
                        vec![1, CLIP_FRAMES, CLIP_SIZE, CLIP_SIZE],
                        data,
                    )?))
                }
                ModalityKind::AudioSpectrogram => {
                    ModalityData::from_spectrogram(&self.spectrograms[clip])
                }
                ModalityKind::HotVector { .. } => ModalityData::from_hot(&self.hots[clip]),
                ModalityKind::Embedding { .. } => Err(asd_core::Error::Model(
                    "meeting datasets do not carry precomputed embeddings".into(),
                )),
            })
            .collect()
    }
}

fn extract_flows(
    stores: &[FrameStore],
    n_clips: usize,
    fps: f64,
) -> CliResult<Vec<Vec<Vec<f32>>>> {
    let jobs: Vec<(usize, usize)> = (0..stores.len())
        .flat_map(|p| (0..n_clips).map(move |k| (p, k)))
        .collect();
    let extracted: CoreResult<Vec<Vec<f32>>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let clip = stores[p].clip(k, fps)?;
            let flow = flow_magnitude_clip(&clip)?;
            Ok(flow.tensor.data().iter().map(|&v| v as f32).collect())
        })
        .collect();
    let mut extracted = extracted?.into_iter();
    let mut flows = Vec::with_capacity(stores.len());
    for _ in 0..stores.len() {
        flows.push((&mut extracted).take(n_clips).collect());
    }
    Ok(flows)
}

/// A labeled training view over several meetings: one sample per
/// (meeting, participant, clip) with a ground-truth label.
pub struct MeetingSamples<'a> {
    meetings: Vec<&'a MeetingData>,
    index: Vec<(usize, usize, usize)>,
}

impl<'a> MeetingSamples<'a> {
    pub fn new(meetings: impl Into<Vec<&'a MeetingData>>) -> CliResult<Self> {
        let meetings = meetings.into();
        let mut index = Vec::new();
        for (m, meeting) in meetings.iter().enumerate() {
            if meeting.reference.is_none() {
                return Err(CliError::data(format!(
                    "meeting {} has no reference RTTM; cannot build labels",
                    meeting.meeting_id
                )));
            }
            for p in 0..meeting.participants() {
                for k in 0..meeting.n_clips {
                    index.push((m, p, k));
                }
            }
        }
        if index.is_empty() {
            return Err(CliError::data("no training samples in the given meetings"));
        }
        Ok(MeetingSamples { meetings, index })
    }
}

impl SampleSource for MeetingSamples<'_> {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn sample(&self, idx: usize) -> CoreResult<TrainSample> {
        let (m, p, k) = self.index[idx];
        let meeting = self.meetings[m];
        Ok(TrainSample {
            inputs: meeting.inputs(p, k)?,
            label: meeting.label(p, k).expect("reference checked in new"),
        })
    }
}

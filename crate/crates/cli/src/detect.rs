//! Per-participant detection with shared model weights.

use rayon::prelude::*;

use asd_core::error::Result as CoreResult;
use asd_core::fusion::FusionModel;
use asd_core::timeline::SpeakerTimeline;

use crate::dataset::MeetingData;
use crate::error::{CliError, CliResult};

/// One clip's speaker probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredClip {
    pub start: f64,
    pub end: f64,
    pub score: f64,
}

/// Scores for one participant over the meeting's clip grid.
#[derive(Clone, Debug)]
pub struct ScoreTimeline {
    pub participant: String,
    pub clips: Vec<ScoredClip>,
}

/// Score every participant's clips with the same model. All participants
/// share one clip grid, so their timelines carry identical timestamps.
pub fn run_detect(meeting: &MeetingData, model: &FusionModel) -> CliResult<Vec<ScoreTimeline>> {
    let jobs: Vec<(usize, usize)> = (0..meeting.participants())
        .flat_map(|p| (0..meeting.n_clips).map(move |k| (p, k)))
        .collect();
    let scores: CoreResult<Vec<f64>> = jobs
        .par_iter()
        .map(|&(p, k)| model.speaker_score(&meeting.inputs(p, k)?))
        .collect();
    let scores = scores?;

    let mut timelines = Vec::with_capacity(meeting.participants());
    let mut it = scores.into_iter();
    for p in 0..meeting.participants() {
        let clips = (0..meeting.n_clips)
            .map(|k| {
                let (start, end) = meeting.clip_window(k);
                ScoredClip {
                    start,
                    end,
                    score: it.next().expect("one score per job"),
                }
            })
            .collect();
        timelines.push(ScoreTimeline {
            participant: meeting.participant_ids[p].clone(),
            clips,
        });
    }
    Ok(timelines)
}

/// Ground-truth label for a scored clip: the participant speaks when the
/// reference covers at least half of the clip window.
pub fn label_for(reference: &SpeakerTimeline, participant: &str, start: f64, end: f64) -> u8 {
    let covered: f64 = reference
        .segments()
        .iter()
        .filter(|s| s.label == participant)
        .map(|s| (s.end.min(end) - s.start.max(start)).max(0.0))
        .sum();
    u8::from(covered >= (end - start) * 0.5)
}

/// Per-participant (scores, labels) pairs against a reference timeline,
/// keyed for the AUC report.
pub fn scored_labels(
    timelines: &[ScoreTimeline],
    reference: &SpeakerTimeline,
    key_prefix: &str,
) -> std::collections::BTreeMap<String, (Vec<f64>, Vec<u8>)> {
    let mut per = std::collections::BTreeMap::new();
    for tl in timelines {
        let scores: Vec<f64> = tl.clips.iter().map(|c| c.score).collect();
        let labels: Vec<u8> = tl
            .clips
            .iter()
            .map(|c| label_for(reference, &tl.participant, c.start, c.end))
            .collect();
        let key = if key_prefix.is_empty() {
            tl.participant.clone()
        } else {
            format!("{key_prefix}:{}", tl.participant)
        };
        per.insert(key, (scores, labels));
    }
    per
}

/// Collapse score timelines into a hypothesis speaker timeline: maximal runs
/// of clips scoring above the threshold become segments.
pub fn hypothesis_timeline(
    timelines: &[ScoreTimeline],
    threshold: f64,
) -> CliResult<SpeakerTimeline> {
    let mut segments = Vec::new();
    for tl in timelines {
        let mut run_start: Option<f64> = None;
        for (i, clip) in tl.clips.iter().enumerate() {
            let above = clip.score > threshold;
            if above && run_start.is_none() {
                run_start = Some(clip.start);
            }
            let run_ends = run_start.is_some() && (!above || i == tl.clips.len() - 1);
            if run_ends {
                let end = if above { clip.end } else { clip.start };
                segments.push(asd_core::timeline::Segment::new(
                    run_start.take().unwrap(),
                    end,
                    tl.participant.clone(),
                ));
            }
        }
    }
    SpeakerTimeline::new(segments).map_err(|e| CliError::data(e.to_string()))
}

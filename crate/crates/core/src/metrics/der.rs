//! Diarization error rate with optimal one-to-one speaker mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{hungarian_max, permutation_max};
use crate::timeline::SpeakerTimeline;

/// DER components in seconds plus the derived rates. Rates are relative to
/// the total reference speech, so DER may exceed 1 when false alarms
/// dominate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerBreakdown {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub total_ref_speech: f64,
    pub missed_rate: f64,
    pub false_alarm_rate: f64,
    pub confusion_rate: f64,
    pub der: f64,
}

impl DerBreakdown {
    fn from_seconds(missed: f64, false_alarm: f64, confusion: f64, total: f64) -> Self {
        DerBreakdown {
            missed,
            false_alarm,
            confusion,
            total_ref_speech: total,
            missed_rate: missed / total,
            false_alarm_rate: false_alarm / total,
            confusion_rate: confusion / total,
            der: (missed + false_alarm + confusion) / total,
        }
    }
}

/// One-to-one pairing between reference and hypothesis labels maximizing the
/// total co-occurring speech time. Small label sets are solved exhaustively;
/// larger ones via the Hungarian algorithm.
pub fn optimal_speaker_mapping(
    reference: &SpeakerTimeline,
    hypothesis: &SpeakerTimeline,
) -> Vec<(String, String)> {
    let ref_labels = reference.labels();
    let hyp_labels = hypothesis.labels();
    if ref_labels.is_empty() || hyp_labels.is_empty() {
        return Vec::new();
    }
    let overlap = overlap_matrix(reference, &ref_labels, hypothesis, &hyp_labels);

    // Orient so rows are the smaller side.
    let transposed = ref_labels.len() > hyp_labels.len();
    let weight: Vec<Vec<f64>> = if transposed {
        (0..hyp_labels.len())
            .map(|h| (0..ref_labels.len()).map(|r| overlap[r][h]).collect())
            .collect()
    } else {
        overlap.clone()
    };

    let assign = if weight.len() <= 8 {
        permutation_max(&weight)
    } else {
        hungarian_max(&weight)
    };

    let mut pairs = Vec::new();
    for (row, &col) in assign.iter().enumerate() {
        let (r, h) = if transposed { (col, row) } else { (row, col) };
        // Zero-overlap pairings carry no information.
        if overlap[r][h] > 0.0 {
            pairs.push((ref_labels[r].clone(), hyp_labels[h].clone()));
        }
    }
    pairs
}

/// Diarization error rate per the missed + false alarm + confusion
/// decomposition, scored over boundary-aligned atomic intervals after the
/// optimal speaker mapping. `collar` excises that many seconds on each side
/// of every reference segment boundary from scoring.
pub fn der(
    reference: &SpeakerTimeline,
    hypothesis: &SpeakerTimeline,
    collar: f64,
) -> Result<DerBreakdown> {
    if reference.total_speech() <= 0.0 {
        return Err(Error::Metrics("empty reference speech".into()));
    }
    let mapping = optimal_speaker_mapping(reference, hypothesis);

    let mut bounds: Vec<f64> = Vec::new();
    for s in reference.segments().iter().chain(hypothesis.segments()) {
        bounds.push(s.start);
        bounds.push(s.end);
    }
    let mut collars: Vec<(f64, f64)> = Vec::new();
    if collar > 0.0 {
        for s in reference.segments() {
            for b in [s.start, s.end] {
                collars.push(((b - collar).max(0.0), b + collar));
                bounds.push((b - collar).max(0.0));
                bounds.push(b + collar);
            }
        }
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let (mut missed, mut false_alarm, mut confusion, mut total) = (0.0, 0.0, 0.0, 0.0);
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dur = b - a;
        if dur <= 0.0 {
            continue;
        }
        let mid = (a + b) / 2.0;
        if collars.iter().any(|&(lo, hi)| lo <= mid && mid < hi) {
            continue;
        }
        let ref_active: Vec<&str> = reference.active_at(mid).iter().map(|&(l, _)| l).collect();
        let hyp_active: Vec<&str> = hypothesis.active_at(mid).iter().map(|&(l, _)| l).collect();
        let n_ref = ref_active.len() as f64;
        let n_hyp = hyp_active.len() as f64;
        let matched = mapping
            .iter()
            .filter(|(r, h)| {
                ref_active.iter().any(|l| l == r) && hyp_active.iter().any(|l| l == h)
            })
            .count() as f64;
        total += dur * n_ref;
        missed += dur * (n_ref - n_hyp).max(0.0);
        false_alarm += dur * (n_hyp - n_ref).max(0.0);
        confusion += dur * (n_ref.min(n_hyp) - matched);
    }
    if total <= 0.0 {
        return Err(Error::Metrics(
            "no reference speech left to score after collar excision".into(),
        ));
    }
    Ok(DerBreakdown::from_seconds(missed, false_alarm, confusion, total))
}

fn overlap_matrix(
    reference: &SpeakerTimeline,
    ref_labels: &[String],
    hypothesis: &SpeakerTimeline,
    hyp_labels: &[String],
) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; hyp_labels.len()]; ref_labels.len()];
    for rs in reference.segments() {
        let r = ref_labels.iter().position(|l| *l == rs.label).unwrap();
        for hs in hypothesis.segments() {
            let overlap = rs.end.min(hs.end) - rs.start.max(hs.start);
            if overlap > 0.0 {
                let h = hyp_labels.iter().position(|l| *l == hs.label).unwrap();
                m[r][h] += overlap;
            }
        }
    }
    m
}

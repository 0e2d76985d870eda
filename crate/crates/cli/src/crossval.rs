//! K-fold cross-validation over meetings.
//!
//! Meetings are ordered by a stable hash of their id and dealt round-robin
//! into folds, so the partition is deterministic and independent of the
//! manifest order on the command line.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use asd_core::fusion::{train, FusionModel};
use asd_core::metrics::macro_micro_auc;

use crate::dataset::{MeetingData, MeetingSamples};
use crate::detect::{run_detect, scored_labels};
use crate::error::{CliError, CliResult};
use crate::manifest::MeetingManifest;
use crate::runconfig::RunConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_meetings: Vec<String>,
    pub macro_auc: f64,
    pub micro_auc: f64,
}

/// Cross-validation outcome: per-fold AUCs and their mean ± sample standard
/// deviation, with the configuration echoed. Wall-clock timings are kept out
/// of the serialized record so identical runs emit identical bytes; they are
/// reported separately.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: RunConfig,
    pub folds: Vec<FoldResult>,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub micro_mean: f64,
    pub micro_std: f64,
    #[serde(skip)]
    pub timings_seconds: Vec<(String, f64)>,
}

/// FNV-1a, stable across runs and platforms.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Fold index per meeting: sort by (hash, id), deal round-robin.
pub fn assign_folds(meeting_ids: &[String], folds: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..meeting_ids.len()).collect();
    order.sort_by(|&a, &b| {
        stable_hash(&meeting_ids[a])
            .cmp(&stable_hash(&meeting_ids[b]))
            .then_with(|| meeting_ids[a].cmp(&meeting_ids[b]))
    });
    let mut assignment = vec![0usize; meeting_ids.len()];
    for (rank, &idx) in order.iter().enumerate() {
        assignment[idx] = rank % folds;
    }
    assignment
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

pub fn cross_validate(
    manifests: &[MeetingManifest],
    config: &RunConfig,
) -> CliResult<ResultRecord> {
    if manifests.len() < config.folds {
        return Err(CliError::config(format!(
            "{} meetings cannot fill {} folds",
            manifests.len(),
            config.folds
        )));
    }
    let ids: Vec<String> = manifests.iter().map(|m| m.meeting_id.clone()).collect();
    let assignment = assign_folds(&ids, config.folds);

    let kinds = config.modality_kinds();
    let mut timings = Vec::new();
    let load_start = Instant::now();
    let meetings: Vec<MeetingData> = manifests
        .iter()
        .map(|m| MeetingData::build(m, &kinds, config.hot_dim))
        .collect::<CliResult<_>>()?;
    timings.push(("load".to_string(), load_start.elapsed().as_secs_f64()));

    let mut folds = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let fold_start = Instant::now();
        let train_set: Vec<&MeetingData> = meetings
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a != fold)
            .map(|(m, _)| m)
            .collect();
        let test_set: Vec<&MeetingData> = meetings
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == fold)
            .map(|(m, _)| m)
            .collect();
        if test_set.is_empty() {
            return Err(CliError::config(format!("fold {fold} has no test meetings")));
        }

        let samples = MeetingSamples::new(train_set)?;
        let mut model = FusionModel::new(config.model_config())?;
        train(&mut model, &samples, &config.train)?;

        let mut per_participant = std::collections::BTreeMap::new();
        for meeting in &test_set {
            let timelines = run_detect(meeting, &model)?;
            let reference = meeting.reference.as_ref().ok_or_else(|| {
                CliError::data(format!(
                    "meeting {} has no reference RTTM for evaluation",
                    meeting.meeting_id
                ))
            })?;
            per_participant.extend(scored_labels(&timelines, reference, &meeting.meeting_id));
        }
        let report = macro_micro_auc(&per_participant).map_err(|e| {
            CliError::data(format!("fold {fold}: {e}"))
        })?;
        folds.push(FoldResult {
            fold,
            test_meetings: test_set.iter().map(|m| m.meeting_id.clone()).collect(),
            macro_auc: report.macro_auc,
            micro_auc: report.micro_auc,
        });
        timings.push((format!("fold{fold}"), fold_start.elapsed().as_secs_f64()));
    }

    let macros: Vec<f64> = folds.iter().map(|f| f.macro_auc).collect();
    let micros: Vec<f64> = folds.iter().map(|f| f.micro_auc).collect();
    let (macro_mean, macro_std) = mean_and_sample_std(&macros);
    let (micro_mean, micro_std) = mean_and_sample_std(&micros);
    Ok(ResultRecord {
        config: config.clone(),
        folds,
        macro_mean,
        macro_std,
        micro_mean,
        micro_std,
        timings_seconds: timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_meetings() {
        let ids: Vec<String> = (0..11).map(|i| format!("meeting{i}")).collect();
        let assignment = assign_folds(&ids, 5);
        assert_eq!(assignment.len(), 11);
        for fold in 0..5 {
            let count = assignment.iter().filter(|&&a| a == fold).count();
            assert!(count >= 2, "fold {fold} has {count} meetings");
        }
    }

    #[test]
    fn assignment_is_order_independent() {
        let mut ids: Vec<String> = (0..7).map(|i| format!("m{i}")).collect();
        let a = assign_folds(&ids, 3);
        let by_id: std::collections::BTreeMap<String, usize> =
            ids.iter().cloned().zip(a.iter().copied()).collect();
        ids.reverse();
        let b = assign_folds(&ids, 3);
        for (id, fold) in ids.iter().zip(b) {
            assert_eq!(by_id[id], fold);
        }
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (mean, std) = mean_and_sample_std(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((std - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stable_hash_is_stable() {
        assert_eq!(stable_hash("meeting0"), stable_hash("meeting0"));
        assert_ne!(stable_hash("meeting0"), stable_hash("meeting1"));
    }
}

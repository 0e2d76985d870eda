//! ROC curves and macro/micro AUC over per-participant scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold-swept (FPR, TPR) points including the (0,0) and (1,1) endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

/// Build an ROC curve. Thresholds are placed at each distinct score in
/// descending order, with equal scores entering as one group.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("roc_curve scores".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Metrics("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metrics(
            "roc_curve needs at least one positive and one negative label".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            (x1 - x0) * (y0 + y1) / 2.0
        })
        .sum()
}

/// Macro/micro AUC over participants, with participants that carry only one
/// class excluded from the macro mean (their ids are reported back).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AucReport {
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub per_participant: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<String>,
}

pub fn macro_micro_auc(per_participant: &BTreeMap<String, (Vec<f64>, Vec<u8>)>) -> Result<AucReport> {
    if per_participant.is_empty() {
        return Err(Error::Metrics("no participants to score".into()));
    }
    let mut per = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    for (id, (scores, labels)) in per_participant {
        counts.insert(id.clone(), scores.len());
        pooled_scores.extend_from_slice(scores);
        pooled_labels.extend_from_slice(labels);
        match roc_curve(scores, labels) {
            Ok(curve) => {
                per.insert(id.clone(), auc(&curve));
            }
            Err(_) => excluded.push(id.clone()),
        }
    }
    if per.is_empty() {
        return Err(Error::Metrics(
            "every participant has single-class labels".into(),
        ));
    }
    let macro_auc = per.values().sum::<f64>() / per.len() as f64;
    let micro_auc = auc(&roc_curve(&pooled_scores, &pooled_labels)?);
    Ok(AucReport {
        macro_auc,
        micro_auc,
        per_participant: per,
        counts,
        excluded,
    })
}

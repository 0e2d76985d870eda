//! Result emission: scores CSV, ROC CSV, JSON reports, and the SVG
//! speaker-activity timeline. Every writer produces deterministic bytes for
//! identical inputs.

use std::path::Path;

use asd_core::metrics::RocCurve;

use crate::detect::{ScoreTimeline, ScoredClip};
use crate::error::{CliError, CliResult};

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("json serialization: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

/// One CSV for all participants: `participant,start,end,score`, floats in
/// shortest round-trip form.
pub fn write_scores_csv(path: &Path, timelines: &[ScoreTimeline]) -> CliResult<()> {
    let mut out = String::from("participant,start,end,score\n");
    for tl in timelines {
        for c in &tl.clips {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                tl.participant, c.start, c.end, c.score
            ));
        }
    }
    write_text(path, &out)
}

pub fn read_scores_csv(path: &Path) -> CliResult<Vec<ScoreTimeline>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut timelines: Vec<ScoreTimeline> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::data(format!(
                "{} line {}: expected 4 fields",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: &str| -> CliResult<f64> {
            s.parse().map_err(|_| {
                CliError::data(format!("{} line {}: bad number", path.display(), lineno + 1))
            })
        };
        let clip = ScoredClip {
            start: parse(fields[1])?,
            end: parse(fields[2])?,
            score: parse(fields[3])?,
        };
        match timelines.iter_mut().find(|t| t.participant == fields[0]) {
            Some(t) => t.clips.push(clip),
            None => timelines.push(ScoreTimeline {
                participant: fields[0].to_string(),
                clips: vec![clip],
            }),
        }
    }
    if timelines.is_empty() {
        return Err(CliError::data(format!(
            "{}: no score rows found",
            path.display()
        )));
    }
    Ok(timelines)
}

/// `fpr,tpr` point list.
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> CliResult<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in &curve.points {
        out.push_str(&format!("{fpr:?},{tpr:?}\n"));
    }
    write_text(path, &out)
}

/// Speaker-activity timeline: one horizontal lane per participant with
/// filled spans where the score exceeds the threshold.
pub fn timeline_svg(timelines: &[ScoreTimeline], threshold: f64) -> String {
    const LANE_HEIGHT: f64 = 24.0;
    const LANE_GAP: f64 = 10.0;
    const LEFT: f64 = 70.0;
    const PX_PER_SECOND: f64 = 12.0;

    let duration = timelines
        .iter()
        .flat_map(|t| t.clips.last())
        .map(|c| c.end)
        .fold(0.0, f64::max);
    let width = LEFT + duration * PX_PER_SECOND + 10.0;
    let height = 30.0 + timelines.len() as f64 * (LANE_HEIGHT + LANE_GAP);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str("<style>text{font:12px monospace;}rect.span{fill:#2b6cb0;}line.base{stroke:#ccc;}</style>\n");
    for (i, tl) in timelines.iter().enumerate() {
        let y = 20.0 + i as f64 * (LANE_HEIGHT + LANE_GAP);
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{:.1}\">{}</text>\n",
            y + LANE_HEIGHT * 0.7,
            tl.participant
        ));
        svg.push_str(&format!(
            "<line class=\"base\" x1=\"{LEFT:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\"/>\n",
            y + LANE_HEIGHT,
            LEFT + duration * PX_PER_SECOND,
            y + LANE_HEIGHT
        ));
        // Maximal above-threshold runs become spans.
        let mut run_start: Option<f64> = None;
        for (k, clip) in tl.clips.iter().enumerate() {
            let above = clip.score > threshold;
            if above && run_start.is_none() {
                run_start = Some(clip.start);
            }
            if run_start.is_some() && (!above || k == tl.clips.len() - 1) {
                let end = if above { clip.end } else { clip.start };
                let start = run_start.take().unwrap();
                svg.push_str(&format!(
                    "<rect class=\"span\" x=\"{:.2}\" y=\"{y:.1}\" width=\"{:.2}\" \
                     height=\"{LANE_HEIGHT:.1}\"/>\n",
                    LEFT + start * PX_PER_SECOND,
                    (end - start) * PX_PER_SECOND
                ));
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_timelines() -> Vec<ScoreTimeline> {
        vec![
            ScoreTimeline {
                participant: "p0".into(),
                clips: vec![
                    ScoredClip { start: 0.0, end: 0.64, score: 0.9 },
                    ScoredClip { start: 0.64, end: 1.28, score: 0.2 },
                    ScoredClip { start: 1.28, end: 1.92, score: 0.8 },
                ],
            },
            ScoreTimeline {
                participant: "p1".into(),
                clips: vec![
                    ScoredClip { start: 0.0, end: 0.64, score: 0.1 },
                    ScoredClip { start: 0.64, end: 1.28, score: 0.3 },
                    ScoredClip { start: 1.28, end: 1.92, score: 0.4 },
                ],
            },
        ]
    }

    #[test]
    fn scores_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let timelines = sample_timelines();
        write_scores_csv(&path, &timelines).unwrap();
        let back = read_scores_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].clips, timelines[0].clips);
        assert_eq!(back[1].participant, "p1");
    }

    #[test]
    fn svg_span_count_matches_runs() {
        let timelines = sample_timelines();
        let svg = timeline_svg(&timelines, 0.5);
        // p0 has two above-threshold runs, p1 none.
        assert_eq!(svg.matches("<rect class=\"span\"").count(), 2);
        assert_eq!(svg.matches("<text").count(), 2);
    }

    #[test]
    fn empty_scores_make_laneful_svg_without_spans() {
        let timelines = vec![ScoreTimeline {
            participant: "p0".into(),
            clips: Vec::new(),
        }];
        let svg = timeline_svg(&timelines, 0.5);
        assert_eq!(svg.matches("<rect class=\"span\"").count(), 0);
        assert_eq!(svg.matches("<text").count(), 1);
    }

    #[test]
    fn svg_bytes_are_deterministic() {
        let a = timeline_svg(&sample_timelines(), 0.5);
        let b = timeline_svg(&sample_timelines(), 0.5);
        assert_eq!(a, b);
    }
}

//! Speaker-labeled segment timelines and RTTM serialization.
//!
//! Timelines carry both diarization hypotheses and ground-truth references;
//! the scoring module consumes them directly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One speech segment: `[start, end)` in seconds with a speaker label.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

impl Segment {
    pub fn new(start: f64, end: f64, label: impl Into<String>) -> Self {
        Segment {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A list of speaker-labeled segments. Segments sharing a label never overlap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpeakerTimeline {
    segments: Vec<Segment>,
}

impl SpeakerTimeline {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.start < s.end) || !s.start.is_finite() || !s.end.is_finite() || s.start < 0.0 {
                return Err(Error::Parse(format!(
                    "invalid segment [{}, {}) for {}",
                    s.start, s.end, s.label
                )));
            }
        }
        segments.sort_by(|a, b| {
            a.start
                .partial_cmp(&b.start)
                .unwrap()
                .then_with(|| a.label.cmp(&b.label))
        });
        // Same-label overlap is a construction error, not a scoring question.
        let mut last_end: BTreeMap<&str, f64> = BTreeMap::new();
        for s in &segments {
            if let Some(&end) = last_end.get(s.label.as_str()) {
                if s.start < end - 1e-9 {
                    return Err(Error::Parse(format!(
                        "overlapping segments for label {}",
                        s.label
                    )));
                }
            }
            last_end.insert(s.label.as_str(), s.end);
        }
        Ok(SpeakerTimeline { segments })
    }

    pub fn empty() -> Self {
        SpeakerTimeline::default()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Sum of segment durations over all labels (overlap counted per label).
    pub fn total_speech(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Distinct labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for s in &self.segments {
            if !seen.iter().any(|l| l == &s.label) {
                seen.push(s.label.clone());
            }
        }
        seen
    }

    /// Labels active at time `t`, paired with their segment start times.
    pub fn active_at(&self, t: f64) -> Vec<(&str, f64)> {
        self.segments
            .iter()
            .filter(|s| s.start <= t && t < s.end)
            .map(|s| (s.label.as_str(), s.start))
            .collect()
    }

    /// Render as RTTM: one `SPEAKER` line per segment, times to 3 decimals.
    pub fn to_rttm(&self, file_id: &str) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(
                out,
                "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
                file_id,
                s.start,
                s.duration(),
                s.label
            );
        }
        out
    }

    pub fn write_rttm(&self, path: &Path, file_id: &str) -> Result<()> {
        std::fs::write(path, self.to_rttm(file_id)).map_err(|e| Error::io(path, e))
    }

    /// Parse RTTM text. Only `SPEAKER` records are consumed; other record
    /// types are skipped.
    pub fn from_rttm(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] != "SPEAKER" {
                continue;
            }
            if fields.len() < 8 {
                return Err(Error::Parse(format!(
                    "rttm line {}: expected at least 8 fields",
                    lineno + 1
                )));
            }
            let tbeg: f64 = fields[3]
                .parse()
                .map_err(|_| Error::Parse(format!("rttm line {}: bad tbeg", lineno + 1)))?;
            let tdur: f64 = fields[4]
                .parse()
                .map_err(|_| Error::Parse(format!("rttm line {}: bad tdur", lineno + 1)))?;
            segments.push(Segment::new(tbeg, tbeg + tdur, fields[7]));
        }
        SpeakerTimeline::new(segments)
    }

    pub fn read_rttm(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SpeakerTimeline::from_rttm(&text)
    }
}

//! Synthetic desk-scale meetings: band-limited-noise speakers over a turn
//! schedule, face-proxy frame sequences, and ground-truth RTTM. Everything
//! is a pure function of the seed, so fixtures are byte-identical across
//! runs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use asd_core::audio::{write_wav_i16, AudioSignal};
use asd_core::timeline::{Segment, SpeakerTimeline};
use asd_core::video::write_pgm;

use crate::error::{CliError, CliResult};
use crate::manifest::{MeetingManifest, ParticipantStream};

pub const FRAME_SIZE: usize = 224;
const FACE_SIZE: usize = 96;
const FACE_X: usize = 64;
const FACE_Y: usize = 56;
/// Triangle wave stepping 2 px per frame.
const OSCILLATION: [usize; 8] = [0, 2, 4, 6, 8, 6, 4, 2];

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub meeting_id: String,
    pub participants: usize,
    pub duration: f64,
    /// Turn length in seconds for the round-robin schedule.
    pub turn: f64,
    /// Silence between turns in seconds.
    pub gap: f64,
    /// Explicit schedule (start, end, participant index); overrides the
    /// round-robin one.
    pub schedule: Option<Vec<(f64, f64, usize)>>,
    pub seed: u64,
    pub fps: f64,
    pub sample_rate: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            meeting_id: "meeting0".to_string(),
            participants: 4,
            duration: 60.0,
            turn: 2.8,
            gap: 1.2,
            schedule: None,
            seed: 0,
            fps: 25.0,
            sample_rate: 16_000,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> CliResult<()> {
        if self.duration < 10.0 {
            return Err(CliError::config("fixture duration must be at least 10 s"));
        }
        if !(2..=7).contains(&self.participants) {
            return Err(CliError::config("participant count must be in [2, 7]"));
        }
        if self.turn <= 0.0 || self.gap < 0.0 {
            return Err(CliError::config("turn must be positive and gap non-negative"));
        }
        Ok(())
    }

    /// The effective schedule: explicit if given, otherwise round-robin
    /// turns separated by gaps.
    pub fn schedule(&self) -> CliResult<Vec<(f64, f64, usize)>> {
        let schedule = match &self.schedule {
            Some(s) => s.clone(),
            None => {
                let mut s = Vec::new();
                let mut t = self.gap;
                let mut speaker = 0usize;
                while t + self.turn <= self.duration {
                    s.push((t, t + self.turn, speaker));
                    speaker = (speaker + 1) % self.participants;
                    t += self.turn + self.gap;
                }
                s
            }
        };
        // Same-speaker overlap is invalid; cross-speaker overlap is allowed.
        for (i, &(s1, e1, p1)) in schedule.iter().enumerate() {
            if !(s1 < e1) || s1 < 0.0 || e1 > self.duration + 1e-9 {
                return Err(CliError::config(format!(
                    "schedule segment {i} [{s1}, {e1}) out of range"
                )));
            }
            if p1 >= self.participants {
                return Err(CliError::config(format!(
                    "schedule segment {i} names participant {p1} of {}",
                    self.participants
                )));
            }
            for &(s2, e2, p2) in schedule.iter().skip(i + 1) {
                if p1 == p2 && s1 < e2 && s2 < e1 {
                    return Err(CliError::config(format!(
                        "participant p{p1} has overlapping segments in the schedule"
                    )));
                }
            }
        }
        Ok(schedule)
    }
}

/// Noise band for one speaker, disjoint across the supported range.
fn speaker_band(speaker: usize) -> (f64, f64) {
    let low = 400.0 + 1000.0 * speaker as f64;
    (low, low + 700.0)
}

/// Generate the fixture under `out_dir` and return the written manifest.
pub fn synth_fixture(spec: &SynthSpec, out_dir: &Path) -> CliResult<MeetingManifest> {
    spec.validate()?;
    let schedule = spec.schedule()?;
    let root = out_dir.join(&spec.meeting_id);
    std::fs::create_dir_all(&root)
        .map_err(|e| CliError::data(format!("{}: {e}", root.display())))?;

    // Mixed audio: per-speaker band noise on the scheduled turns.
    let n_samples = (spec.duration * spec.sample_rate as f64).round() as usize;
    let mut samples = vec![0.0f64; n_samples];
    for (idx, &(start, end, speaker)) in schedule.iter().enumerate() {
        let (low, high) = speaker_band(speaker);
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed ^ 0x5eed_0000_0000 ^ ((speaker as u64) << 16) ^ idx as u64,
        );
        let k = 40;
        let freqs: Vec<f64> = (0..k).map(|_| rng.random_range(low..high)).collect();
        let phases: Vec<f64> = (0..k)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let amp = 0.3 * (2.0 / k as f64).sqrt();
        let a = (start * spec.sample_rate as f64).round() as usize;
        let b = ((end * spec.sample_rate as f64).round() as usize).min(n_samples);
        for (i, sample) in samples.iter_mut().enumerate().take(b).skip(a) {
            let t = i as f64 / spec.sample_rate as f64;
            let v: f64 = freqs
                .iter()
                .zip(&phases)
                .map(|(f, p)| (std::f64::consts::TAU * f * t + p).sin())
                .sum();
            *sample += v * amp;
        }
    }
    let audio_path = root.join("audio.wav");
    write_wav_i16(&audio_path, &AudioSignal::new(samples, spec.sample_rate)?)?;

    // Ground truth.
    let segments: Vec<Segment> = schedule
        .iter()
        .map(|&(s, e, p)| Segment::new(s, e, format!("p{p}")))
        .collect();
    let reference = SpeakerTimeline::new(segments)?;
    let rttm_path = root.join("ref.rttm");
    reference.write_rttm(&rttm_path, &spec.meeting_id)?;

    // Per-participant frame sequences.
    let n_frames = (spec.duration * spec.fps).round() as usize;
    let mut streams = Vec::with_capacity(spec.participants);
    for p in 0..spec.participants {
        let dir = root.join(format!("frames/p{p}"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        write_participant_frames(spec, &schedule, p, n_frames, &dir)?;
        streams.push(ParticipantStream {
            id: format!("p{p}"),
            frames_dir: PathBuf::from(format!("{}/frames/p{p}", spec.meeting_id)),
            boxes_csv: None,
        });
    }

    let manifest = MeetingManifest {
        meeting_id: spec.meeting_id.clone(),
        audio: PathBuf::from(format!("{}/audio.wav", spec.meeting_id)),
        fps: spec.fps,
        participants: streams,
        reference_rttm: Some(PathBuf::from(format!("{}/ref.rttm", spec.meeting_id))),
    };
    let manifest_path = out_dir.join(format!("{}.json", spec.meeting_id));
    manifest.save(&manifest_path)?;
    MeetingManifest::load(&manifest_path)
}

fn write_participant_frames(
    spec: &SynthSpec,
    schedule: &[(f64, f64, usize)],
    participant: usize,
    n_frames: usize,
    dir: &Path,
) -> CliResult<()> {
    // Static face texture, seeded per participant.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (0xface_0000 + participant as u64));
    let texture: Vec<u8> = (0..FACE_SIZE * FACE_SIZE)
        .map(|_| rng.random_range(64..192) as u8)
        .collect();
    let blink_period = rng.random_range(40..60usize);
    let blink_phase = rng.random_range(0..blink_period);

    let active_at = |t: f64| {
        schedule
            .iter()
            .any(|&(s, e, p)| p == participant && s <= t && t < e)
    };

    let mut frame = vec![128u8; FRAME_SIZE * FRAME_SIZE];
    let mut frames_since_onset = 0usize;
    for f in 0..n_frames {
        let t = f as f64 / spec.fps;
        let active = active_at(t);
        let y_offset = if active {
            let o = OSCILLATION[frames_since_onset % OSCILLATION.len()];
            frames_since_onset += 1;
            o
        } else {
            frames_since_onset = 0;
            0
        };

        frame.iter_mut().for_each(|v| *v = 128);
        for (row, tex_row) in texture.chunks_exact(FACE_SIZE).enumerate() {
            let y = FACE_Y + y_offset + row;
            let base = y * FRAME_SIZE + FACE_X;
            frame[base..base + FACE_SIZE].copy_from_slice(tex_row);
        }
        // Inactive participants blink for a single frame now and then.
        if !active && (f + blink_phase) % blink_period == 0 {
            for y in FACE_Y + 24..FACE_Y + 36 {
                for x in FACE_X + 16..FACE_X + 80 {
                    frame[y * FRAME_SIZE + x] /= 2;
                }
            }
        }
        write_pgm(&dir.join(format!("f{f:05}.pgm")), FRAME_SIZE, FRAME_SIZE, &frame)?;
    }
    Ok(())
}

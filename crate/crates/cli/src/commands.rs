//! Subcommand implementations behind the `asd` binary.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use asd_core::audio::{normalize_clip, read_wav, slice_audio_clips, spectrogram, CLIP_SECONDS};
use asd_core::diarization::{diarize, DiarizeConfig};
use asd_core::fusion::{load_checkpoint, save_checkpoint, train, FusionModel};
use asd_core::io::{write_matrix, write_matrix_csv, FeatureMatrix};
use asd_core::metrics::{auc, der, macro_micro_auc, roc_curve};
use asd_core::timeline::SpeakerTimeline;
use asd_core::video::CLIP_FRAMES;

use crate::crossval::cross_validate;
use crate::dataset::{MeetingData, MeetingSamples};
use crate::detect::{hypothesis_timeline, run_detect, scored_labels};
use crate::error::{CliError, CliResult};
use crate::manifest::MeetingManifest;
use crate::outputs::{
    read_scores_csv, timeline_svg, write_json, write_roc_csv, write_scores_csv, write_text,
};
use crate::runconfig::{ConfigOverrides, RunConfig};
use crate::synth::{synth_fixture, SynthSpec};

#[derive(Parser, Debug)]
#[command(name = "asd", about = "Active speaker detection pipeline", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic meeting fixture (audio, frames, ground truth).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "meeting0")]
        meeting_id: String,
        #[arg(long, default_value_t = 4)]
        participants: usize,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Turn length in seconds for the round-robin schedule.
        #[arg(long, default_value_t = 2.8)]
        turn: f64,
        /// Silence between turns in seconds.
        #[arg(long, default_value_t = 1.2)]
        gap: f64,
        /// JSON schedule file: [[start, end, participant], ...].
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
    },
    /// Extract normalized spectrogram clips to binary feature dumps.
    ExtractAudio {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV next to each dump.
        #[arg(long, default_value_t = false)]
        csv: bool,
    },
    /// Extract optical-flow magnitude clips to binary feature dumps.
    ExtractFlow {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one participant id.
        #[arg(long)]
        participant: Option<String>,
        /// Cap on the number of clips per participant.
        #[arg(long)]
        max_clips: Option<usize>,
    },
    /// Run unsupervised speaker diarization on the meeting audio.
    Diarize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a fusion model on one or more meetings.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Score every participant of a meeting with a trained model.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Model checkpoint from `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Evaluate detection scores (and optionally a diarization hypothesis)
    /// against the reference.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// scores.csv from `detect`.
        #[arg(long)]
        scores: PathBuf,
        /// Diarization hypothesis RTTM to score with DER.
        #[arg(long)]
        hyp_rttm: Option<PathBuf>,
        /// DER collar in seconds.
        #[arg(long, default_value_t = 0.0)]
        collar: f64,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// K-fold cross-validation over several meetings.
    CrossValidate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Render a speaker-activity timeline SVG from detection scores.
    Plot {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth {
            out,
            meeting_id,
            participants,
            duration,
            turn,
            gap,
            schedule,
            seed,
            fps,
        } => {
            let schedule = match schedule {
                Some(path) => Some(read_schedule(&path)?),
                None => None,
            };
            let spec = SynthSpec {
                meeting_id,
                participants,
                duration,
                turn,
                gap,
                schedule,
                seed,
                fps,
                ..SynthSpec::default()
            };
            let manifest = synth_fixture(&spec, &out)?;
            println!(
                "wrote fixture {} ({} participants, {:.1}s)",
                out.join(format!("{}.json", manifest.meeting_id)).display(),
                manifest.participants.len(),
                duration
            );
            Ok(())
        }

        Command::ExtractAudio { manifest, out, csv } => {
            let manifest = MeetingManifest::load(&manifest)?;
            ensure_dir(&out)?;
            let audio = read_wav(&manifest.audio)?;
            let clips = slice_audio_clips(&audio, CLIP_SECONDS)?;
            for (k, clip) in clips.iter().enumerate() {
                let spec = normalize_clip(&spectrogram(clip)?);
                let matrix = FeatureMatrix::new(spec.frames, spec.bins, spec.data.clone())?;
                let path = out.join(format!("audio_clip_{k:04}.bin"));
                write_matrix(&path, &matrix)?;
                if csv {
                    write_matrix_csv(&out.join(format!("audio_clip_{k:04}.csv")), &matrix)?;
                }
            }
            println!("wrote {} spectrogram clips to {}", clips.len(), out.display());
            Ok(())
        }

        Command::ExtractFlow {
            manifest,
            out,
            participant,
            max_clips,
        } => {
            let manifest = MeetingManifest::load(&manifest)?;
            ensure_dir(&out)?;
            let kinds = [asd_core::fusion::ModalityKind::VideoFlow];
            let selected: Vec<_> = manifest
                .participants
                .iter()
                .filter(|p| participant.as_ref().is_none_or(|want| *want == p.id))
                .cloned()
                .collect();
            if selected.is_empty() {
                return Err(CliError::config(format!(
                    "participant {participant:?} not found in meeting {}",
                    manifest.meeting_id
                )));
            }
            let scoped = MeetingManifest {
                participants: selected,
                ..manifest.clone()
            };
            let data = MeetingData::build(&scoped, &kinds, 8)?;
            let n = max_clips.unwrap_or(data.n_clips).min(data.n_clips);
            let mut written = 0usize;
            for (p, id) in data.participant_ids.iter().enumerate() {
                for k in 0..n {
                    let inputs = data.inputs(p, k)?;
                    let tensor = match &inputs[0] {
                        asd_core::fusion::ModalityData::Flow(t) => t,
                        _ => unreachable!("flow-only modality list"),
                    };
                    // Dump as frames × (H·W) rows.
                    let matrix = FeatureMatrix::new(
                        CLIP_FRAMES,
                        tensor.len() / CLIP_FRAMES,
                        tensor.data().to_vec(),
                    )?;
                    write_matrix(&out.join(format!("{id}_flow_{k:04}.bin")), &matrix)?;
                    written += 1;
                }
            }
            println!("wrote {written} flow clips to {}", out.display());
            Ok(())
        }

        Command::Diarize { manifest, out, seed } => {
            let manifest = MeetingManifest::load(&manifest)?;
            ensure_dir(&out)?;
            let audio = read_wav(&manifest.audio)?;
            let config = DiarizeConfig { seed, ..DiarizeConfig::default() };
            let timeline = diarize(&audio, &config)?;
            let rttm_path = out.join("diarization.rttm");
            timeline.write_rttm(&rttm_path, &manifest.meeting_id)?;
            println!(
                "wrote {} ({} segments, {} speakers)",
                rttm_path.display(),
                timeline.segments().len(),
                timeline.labels().len()
            );
            if let Some(ref_path) = &manifest.reference_rttm {
                let reference = SpeakerTimeline::read_rttm(ref_path)?;
                let breakdown = der(&reference, &timeline, 0.0)?;
                write_der_reports(&out, &breakdown)?;
                println!(
                    "DER {:.4} (missed {:.4}, false alarm {:.4}, confusion {:.4})",
                    breakdown.der,
                    breakdown.missed_rate,
                    breakdown.false_alarm_rate,
                    breakdown.confusion_rate
                );
            }
            Ok(())
        }

        Command::Train {
            config,
            manifests,
            overrides,
        } => {
            let config = RunConfig::resolve(config.as_deref(), &overrides)?;
            let out = PathBuf::from(&config.out_dir);
            ensure_dir(&out)?;
            let loaded: Vec<MeetingManifest> = manifests
                .iter()
                .map(|p| MeetingManifest::load(p))
                .collect::<CliResult<_>>()?;
            let kinds = config.modality_kinds();
            let meetings: Vec<MeetingData> = loaded
                .iter()
                .map(|m| MeetingData::build(m, &kinds, config.hot_dim))
                .collect::<CliResult<_>>()?;
            let samples = MeetingSamples::new(meetings.iter().collect::<Vec<_>>())?;

            let mut model = FusionModel::new(config.model_config())?;
            let history = train(&mut model, &samples, &config.train)?;

            save_checkpoint(&out.join("model.ckpt"), &model)?;
            config.save(&out.join("config.json"))?;
            write_json(&out.join("history.json"), &history)?;
            println!(
                "trained on {} samples for {} epochs; final loss {:.6}; wrote {}",
                samples_len(&meetings),
                history.len(),
                history.last().unwrap(),
                out.join("model.ckpt").display()
            );
            Ok(())
        }

        Command::Detect {
            config,
            manifest,
            model,
            overrides,
        } => {
            let config = RunConfig::resolve(config.as_deref(), &overrides)?;
            let out = PathBuf::from(&config.out_dir);
            ensure_dir(&out)?;
            let manifest = MeetingManifest::load(&manifest)?;
            let data = MeetingData::build(&manifest, &config.modality_kinds(), config.hot_dim)?;

            let mut fusion_model = FusionModel::new(config.model_config())?;
            load_checkpoint(&model, &mut fusion_model)?;

            let timelines = run_detect(&data, &fusion_model)?;
            write_scores_csv(&out.join("scores.csv"), &timelines)?;
            let hypothesis = hypothesis_timeline(&timelines, config.score_threshold)?;
            hypothesis.write_rttm(&out.join("hypothesis.rttm"), &manifest.meeting_id)?;
            write_text(
                &out.join("timeline.svg"),
                &timeline_svg(&timelines, config.score_threshold),
            )?;
            println!(
                "scored {} participants x {} clips; wrote {}",
                data.participants(),
                data.n_clips,
                out.join("scores.csv").display()
            );
            Ok(())
        }

        Command::Evaluate {
            config,
            manifest,
            scores,
            hyp_rttm,
            collar,
            overrides,
        } => {
            let config = RunConfig::resolve(config.as_deref(), &overrides)?;
            let out = PathBuf::from(&config.out_dir);
            ensure_dir(&out)?;
            let manifest = MeetingManifest::load(&manifest)?;
            let reference_path = manifest.reference_rttm.as_ref().ok_or_else(|| {
                CliError::data(format!(
                    "meeting {} has no reference RTTM to evaluate against",
                    manifest.meeting_id
                ))
            })?;
            let reference = SpeakerTimeline::read_rttm(reference_path)?;
            let timelines = read_scores_csv(&scores)?;

            let per = scored_labels(&timelines, &reference, "");
            let report = macro_micro_auc(&per)?;
            write_json(&out.join("auc_report.json"), &report)?;

            // ROC point lists: pooled plus per participant where defined.
            let mut pooled_scores = Vec::new();
            let mut pooled_labels = Vec::new();
            for (id, (s, l)) in &per {
                pooled_scores.extend_from_slice(s);
                pooled_labels.extend_from_slice(l);
                if let Ok(curve) = roc_curve(s, l) {
                    write_roc_csv(&out.join(format!("roc_{id}.csv")), &curve)?;
                }
            }
            let pooled = roc_curve(&pooled_scores, &pooled_labels)?;
            write_roc_csv(&out.join("roc_micro.csv"), &pooled)?;
            println!(
                "macro AUC {:.4}, micro AUC {:.4} (pooled AUC {:.4})",
                report.macro_auc,
                report.micro_auc,
                auc(&pooled)
            );

            if let Some(hyp_path) = hyp_rttm {
                let hypothesis = SpeakerTimeline::read_rttm(&hyp_path)?;
                let breakdown = der(&reference, &hypothesis, collar)?;
                write_der_reports(&out, &breakdown)?;
                println!("DER {:.4}", breakdown.der);
            }
            Ok(())
        }

        Command::CrossValidate {
            config,
            manifests,
            overrides,
        } => {
            let config = RunConfig::resolve(config.as_deref(), &overrides)?;
            let out = PathBuf::from(&config.out_dir);
            ensure_dir(&out)?;
            let loaded: Vec<MeetingManifest> = manifests
                .iter()
                .map(|p| MeetingManifest::load(p))
                .collect::<CliResult<_>>()?;
            let record = cross_validate(&loaded, &config)?;
            write_json(&out.join("results.json"), &record)?;
            let timings: String = record
                .timings_seconds
                .iter()
                .map(|(stage, secs)| format!("{stage}\t{secs:.3}s\n"))
                .collect();
            write_text(&out.join("timings.txt"), &timings)?;
            println!(
                "macro AUC {:.4} ± {:.4} over {} folds; wrote {}",
                record.macro_mean,
                record.macro_std,
                record.folds.len(),
                out.join("results.json").display()
            );
            Ok(())
        }

        Command::Plot {
            scores,
            out,
            threshold,
        } => {
            let timelines = read_scores_csv(&scores)?;
            write_text(&out, &timeline_svg(&timelines, threshold))?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn samples_len(meetings: &[MeetingData]) -> usize {
    meetings
        .iter()
        .map(|m| m.participants() * m.n_clips)
        .sum()
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn read_schedule(path: &Path) -> CliResult<Vec<(f64, f64, usize)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// The four-rate DER report named in the metrics interface, plus the full
/// breakdown with seconds alongside.
fn write_der_reports(out: &Path, breakdown: &asd_core::metrics::DerBreakdown) -> CliResult<()> {
    let report = serde_json::json!({
        "missed": breakdown.missed_rate,
        "false_alarm": breakdown.false_alarm_rate,
        "confusion": breakdown.confusion_rate,
        "der": breakdown.der,
    });
    write_json(&out.join("der_report.json"), &report)?;
    write_json(&out.join("der_breakdown.json"), breakdown)
}

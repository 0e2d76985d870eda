//! Run configuration: modality selection, embedding sizes, fusion mode,
//! training settings. Loadable from JSON with every field overridable by a
//! CLI flag of the same name.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use asd_core::fusion::{ModalityConfig, ModalityKind, ModelConfig, TrainConfig};

use crate::error::{CliError, CliResult};

/// Modality selector tokens as they appear in configs and flags.
pub const MODALITY_TOKENS: [&str; 4] = ["rgb", "of", "audio", "pybk"];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Active branches: any of "rgb", "of", "audio" (spectrogram net path),
    /// "pybk" (diarization hot-vector path). The two audio paths are
    /// mutually exclusive.
    pub modalities: Vec<String>,
    /// Embedding size per modality token.
    pub embedding_sizes: BTreeMap<String, usize>,
    /// "naive" or "attention".
    pub fusion: String,
    #[serde(default)]
    pub attention_preproject: bool,
    /// Hot-vector dimension (maximum speakers + 1).
    pub hot_dim: usize,
    pub train: TrainConfig,
    pub folds: usize,
    pub out_dir: String,
    /// Model initialization seed.
    pub seed: u64,
    /// Decision threshold for timeline plots and hypothesis RTTM.
    pub score_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut embedding_sizes = BTreeMap::new();
        embedding_sizes.insert("rgb".to_string(), 128);
        embedding_sizes.insert("of".to_string(), 128);
        embedding_sizes.insert("audio".to_string(), 16);
        embedding_sizes.insert("pybk".to_string(), 16);
        RunConfig {
            modalities: vec!["rgb".to_string()],
            embedding_sizes,
            fusion: "naive".to_string(),
            attention_preproject: false,
            hot_dim: 8,
            train: TrainConfig::default(),
            folds: 5,
            out_dir: "out".to_string(),
            seed: 0,
            score_threshold: 0.5,
        }
    }
}

/// Flag-level overrides shared by every subcommand that takes a config.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigOverrides {
    /// Comma-separated modality list (rgb,of,audio,pybk).
    #[arg(long, value_delimiter = ',')]
    pub modalities: Option<Vec<String>>,
    /// Per-modality embedding size, repeatable: --embedding-size of=128.
    #[arg(long = "embedding-size", value_name = "MODALITY=SIZE")]
    pub embedding_size: Vec<String>,
    /// Fusion mode: naive or attention.
    #[arg(long)]
    pub fusion: Option<String>,
    #[arg(long)]
    pub attention_preproject: Option<bool>,
    #[arg(long)]
    pub hot_dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Shuffling seed for training.
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Model initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub score_threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    /// Optional config file merged with flag overrides, then validated.
    pub fn resolve(path: Option<&Path>, overrides: &ConfigOverrides) -> CliResult<Self> {
        let mut config = match path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        config.apply(overrides)?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &ConfigOverrides) -> CliResult<()> {
        if let Some(m) = &o.modalities {
            self.modalities = m.clone();
        }
        for spec in &o.embedding_size {
            let (token, size) = spec.split_once('=').ok_or_else(|| {
                CliError::config(format!("--embedding-size {spec}: expected MODALITY=SIZE"))
            })?;
            let size: usize = size
                .parse()
                .map_err(|_| CliError::config(format!("--embedding-size {spec}: bad size")))?;
            self.embedding_sizes.insert(token.to_string(), size);
        }
        if let Some(f) = &o.fusion {
            self.fusion = f.clone();
        }
        if let Some(v) = o.attention_preproject {
            self.attention_preproject = v;
        }
        if let Some(v) = o.hot_dim {
            self.hot_dim = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(v) = o.learning_rate {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.train_seed {
            self.train.seed = v;
        }
        if let Some(v) = o.folds {
            self.folds = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.score_threshold {
            self.score_threshold = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.modalities.is_empty() {
            return Err(CliError::config("at least one modality is required"));
        }
        for m in &self.modalities {
            if !MODALITY_TOKENS.contains(&m.as_str()) {
                return Err(CliError::config(format!(
                    "unknown modality {m:?} (expected one of {MODALITY_TOKENS:?})"
                )));
            }
        }
        let audio_paths = self
            .modalities
            .iter()
            .filter(|m| *m == "audio" || *m == "pybk")
            .count();
        if audio_paths > 1 {
            return Err(CliError::config(
                "modalities may include at most one audio path (audio or pybk)",
            ));
        }
        if self.fusion != "naive" && self.fusion != "attention" {
            return Err(CliError::config(format!(
                "fusion must be \"naive\" or \"attention\", got {:?}",
                self.fusion
            )));
        }
        if self.folds < 2 {
            return Err(CliError::config("fold count must be at least 2"));
        }
        if self.hot_dim < 2 {
            return Err(CliError::config("hot_dim must be at least 2"));
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(CliError::config("batch size and epochs must be positive"));
        }
        for m in &self.modalities {
            match self.embedding_sizes.get(m) {
                Some(&s) if s > 0 => {}
                _ => {
                    return Err(CliError::config(format!(
                        "modality {m} needs a positive embedding size"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Modality kinds in config order.
    pub fn modality_kinds(&self) -> Vec<ModalityKind> {
        self.modalities
            .iter()
            .map(|m| match m.as_str() {
                "rgb" => ModalityKind::VideoRgb,
                "of" => ModalityKind::VideoFlow,
                "audio" => ModalityKind::AudioSpectrogram,
                "pybk" => ModalityKind::HotVector { dim: self.hot_dim },
                _ => unreachable!("validated"),
            })
            .collect()
    }

    pub fn model_config(&self) -> ModelConfig {
        let modalities = self
            .modalities
            .iter()
            .zip(self.modality_kinds())
            .map(|(token, kind)| ModalityConfig::new(kind, self.embedding_sizes[token]))
            .collect();
        ModelConfig {
            modalities,
            attention: self.fusion == "attention",
            attention_preproject: self.attention_preproject,
            head_hidden: 32,
            seed: self.seed,
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::data(format!("config serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn both_audio_paths_rejected() {
        let mut c = RunConfig::default();
        c.modalities = vec!["audio".into(), "pybk".into()];
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::default();
        let o = ConfigOverrides {
            modalities: Some(vec!["rgb".into(), "of".into(), "pybk".into()]),
            embedding_size: vec!["pybk=32".into()],
            fusion: Some("attention".into()),
            epochs: Some(3),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        c.validate().unwrap();
        assert_eq!(c.modalities.len(), 3);
        assert_eq!(c.embedding_sizes["pybk"], 32);
        assert_eq!(c.fusion, "attention");
        assert_eq!(c.train.epochs, 3);
        let mc = c.model_config();
        assert!(mc.attention);
        assert_eq!(mc.modalities.len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let c = RunConfig::default();
        c.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(back.modalities, c.modalities);
        assert_eq!(back.train.epochs, c.train.epochs);
    }

    #[test]
    fn unknown_modality_is_config_error() {
        let mut c = RunConfig::default();
        c.modalities = vec!["video".into()];
        let err = c.validate().unwrap_err();
        assert_eq!(err.kind, crate::error::ExitKind::Config);
    }
}

//! Meeting manifests: one mixed audio file plus per-participant frame
//! directories, with optional bounding boxes and reference RTTM.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParticipantStream {
    pub id: String,
    pub frames_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeetingManifest {
    pub meeting_id: String,
    pub audio: PathBuf,
    pub fps: f64,
    pub participants: Vec<ParticipantStream>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rttm: Option<PathBuf>,
}

impl MeetingManifest {
    /// Load a manifest and resolve its paths relative to the manifest file,
    /// checking that each referenced path exists.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let mut manifest: MeetingManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        manifest.resolve(base)?;
        Ok(manifest)
    }

    fn resolve(&mut self, base: &Path) -> CliResult<()> {
        if self.participants.is_empty() {
            return Err(CliError::config(format!(
                "meeting {}: at least one participant stream is required",
                self.meeting_id
            )));
        }
        if !(self.fps > 0.0) {
            return Err(CliError::config(format!(
                "meeting {}: fps must be positive",
                self.meeting_id
            )));
        }
        let anchor = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        self.audio = anchor(&self.audio);
        require(&self.audio)?;
        for stream in &mut self.participants {
            stream.frames_dir = anchor(&stream.frames_dir);
            require(&stream.frames_dir)?;
            if let Some(csv) = &stream.boxes_csv {
                let resolved = anchor(csv);
                require(&resolved)?;
                stream.boxes_csv = Some(resolved);
            }
        }
        if let Some(rttm) = &self.reference_rttm {
            let resolved = anchor(rttm);
            require(&resolved)?;
            self.reference_rttm = Some(resolved);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::data(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "manifest references missing path {}",
            path.display()
        )))
    }
}

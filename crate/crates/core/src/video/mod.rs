//! Face-crop frame ingestion and the motion channel.
//!
//! Frames arrive as directories of zero-padded numbered PNG or binary PGM
//! images (face detection happens upstream; bounding boxes are inputs).
//! Frames are held as 8-bit RGB and expanded to `f64` tensors per clip, which
//! keeps a full meeting resident at desk scale.

mod clips;
mod flow;

pub use clips::{assemble_clips, crop_resize, FlowClip, FrameClip, CLIP_FRAMES, CLIP_SIZE};
pub use flow::{dense_flow, flow_magnitude_clip, FlowConfig, FlowField};

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// One frame: interleaved RGB, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, `3 * width * height` values.
    pub data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::ShapeMismatch {
                context: "Frame::new",
                expected: format!("{}", 3 * width * height),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Single grayscale plane via the usual luma weights.
    pub fn to_luma(&self) -> GrayPlane {
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        }
        GrayPlane {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// A single-channel image plane.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayPlane {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Per-frame face bounding boxes in source-image pixels.
#[derive(Clone, Debug, Default)]
pub struct BoundingBoxTrack {
    boxes: BTreeMap<usize, (f64, f64, f64, f64)>,
}

impl BoundingBoxTrack {
    pub fn get(&self, frame: usize) -> Option<(f64, f64, f64, f64)> {
        self.boxes.get(&frame).copied()
    }

    pub fn insert(&mut self, frame: usize, bbox: (f64, f64, f64, f64)) {
        self.boxes.insert(frame, bbox);
    }

    /// Parse `frame_idx,x,y,w,h` lines; a leading header row is skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut boxes = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("frame")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "bbox csv line {}: expected 5 fields",
                    lineno + 1
                )));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bbox csv line {}: bad index", lineno + 1)))?;
            let mut vals = [0.0f64; 4];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                *v = f.parse().map_err(|_| {
                    Error::Parse(format!("bbox csv line {}: bad number", lineno + 1))
                })?;
            }
            boxes.insert(idx, (vals[0], vals[1], vals[2], vals[3]));
        }
        Ok(BoundingBoxTrack { boxes })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// An ordered frame sequence held as 8-bit RGB, already cropped and resized
/// to the clip resolution.
#[derive(Clone, Debug)]
pub struct FrameStore {
    pub participant_id: String,
    width: usize,
    height: usize,
    /// Interleaved RGB bytes per frame.
    frames: Vec<Vec<u8>>,
}

impl FrameStore {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame(&self, idx: usize) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.frames[idx].iter().map(|&b| b as f64 / 255.0).collect(),
        }
    }

    /// Build a store from already-prepared frames, quantizing to 8-bit.
    pub fn from_frames(participant_id: &str, frames: &[Frame]) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("FrameStore::from_frames"));
        }
        let (width, height) = (frames[0].width, frames[0].height);
        let mut stored = Vec::with_capacity(frames.len());
        for f in frames {
            if f.width != width || f.height != height {
                return Err(Error::ShapeMismatch {
                    context: "FrameStore::from_frames",
                    expected: format!("{width}x{height}"),
                    actual: format!("{}x{}", f.width, f.height),
                });
            }
            stored.push(
                f.data
                    .iter()
                    .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                    .collect(),
            );
        }
        Ok(FrameStore {
            participant_id: participant_id.to_string(),
            width,
            height,
            frames: stored,
        })
    }

    /// Load a participant's frame directory: every `.png`/`.pgm` file in
    /// filename order, cropped by the bounding-box track (full frame where a
    /// box is absent) and resized to `target` square pixels.
    pub fn load_dir(
        participant_id: &str,
        dir: &Path,
        boxes: Option<&BoundingBoxTrack>,
        target: usize,
    ) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("png") | Some("pgm")
                )
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Image {
                path: dir.to_path_buf(),
                message: "no .png or .pgm frames found".into(),
            });
        }

        let mut frames = Vec::with_capacity(paths.len());
        for (idx, p) in paths.iter().enumerate() {
            let frame = load_image(p)?;
            let bbox = boxes.and_then(|b| b.get(idx)).unwrap_or((
                0.0,
                0.0,
                frame.width as f64,
                frame.height as f64,
            ));
            let prepared = if bbox == (0.0, 0.0, target as f64, target as f64)
                && frame.width == target
                && frame.height == target
            {
                frame
            } else {
                crop_resize(&frame, bbox, target)?
            };
            frames.push(prepared);
        }
        FrameStore::from_frames(participant_id, &frames)
    }
}

/// Decode a PNG or PGM file into an RGB frame.
pub fn load_image(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Frame::new(w, h, data)
}

/// Write a grayscale image as binary PGM (P5), 8-bit.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch {
            context: "write_pgm",
            expected: format!("{}", width * height),
            actual: format!("{}", pixels.len()),
        });
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

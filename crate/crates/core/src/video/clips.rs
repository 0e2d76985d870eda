//! 16-frame clip assembly and face-crop resizing.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::video::{Frame, FrameStore};

/// Frames per clip.
pub const CLIP_FRAMES: usize = 16;
/// Clip spatial resolution (square).
pub const CLIP_SIZE: usize = 224;

/// A 3 × 16 × 224 × 224 RGB clip tensor with its start time.
#[derive(Clone, Debug)]
pub struct FrameClip {
    pub tensor: Tensor,
    pub start_time: f64,
    pub participant_id: String,
}

/// A 1 × 16 × 224 × 224 optical-flow magnitude clip aligned to a FrameClip.
#[derive(Clone, Debug)]
pub struct FlowClip {
    pub tensor: Tensor,
    pub start_time: f64,
    pub participant_id: String,
}

impl FrameStore {
    /// Number of whole 16-frame clips; the remainder is dropped.
    pub fn clip_count(&self) -> usize {
        self.len() / CLIP_FRAMES
    }

    /// Materialize clip `k` as a channels × frames × H × W tensor.
    pub fn clip(&self, k: usize, fps: f64) -> Result<FrameClip> {
        if self.width() != CLIP_SIZE || self.height() != CLIP_SIZE {
            return Err(Error::ShapeMismatch {
                context: "FrameStore::clip",
                expected: format!("{CLIP_SIZE}x{CLIP_SIZE} frames"),
                actual: format!("{}x{}", self.width(), self.height()),
            });
        }
        if k >= self.clip_count() {
            return Err(Error::Model(format!(
                "clip {k} out of range ({} available)",
                self.clip_count()
            )));
        }
        let plane = CLIP_SIZE * CLIP_SIZE;
        let mut data = vec![0.0; 3 * CLIP_FRAMES * plane];
        for f in 0..CLIP_FRAMES {
            let frame = self.frame(k * CLIP_FRAMES + f);
            for (i, px) in frame.data.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * CLIP_FRAMES * plane + f * plane + i] = px[c];
                }
            }
        }
        Ok(FrameClip {
            tensor: Tensor::new(vec![3, CLIP_FRAMES, CLIP_SIZE, CLIP_SIZE], data)?,
            start_time: (k * CLIP_FRAMES) as f64 / fps,
            participant_id: self.participant_id.clone(),
        })
    }

    /// Grayscale plane of one frame (for flow extraction).
    pub fn luma(&self, idx: usize) -> crate::video::GrayPlane {
        self.frame(idx).to_luma()
    }
}

/// Group a frame sequence into consecutive non-overlapping 16-frame clips.
pub fn assemble_clips(store: &FrameStore, fps: f64) -> Result<Vec<FrameClip>> {
    if store.len() < CLIP_FRAMES {
        return Err(Error::Model(format!(
            "{} frames are fewer than the {CLIP_FRAMES} needed for one clip",
            store.len()
        )));
    }
    (0..store.clip_count()).map(|k| store.clip(k, fps)).collect()
}

/// Crop a bounding box out of a frame and bilinearly resize it to a square
/// `target` resolution. Output values are clamped to `[0, 1]`.
pub fn crop_resize(frame: &Frame, bbox: (f64, f64, f64, f64), target: usize) -> Result<Frame> {
    let (bx, by, bw, bh) = bbox;
    if !(bw > 0.0 && bh > 0.0) {
        return Err(Error::Image {
            path: Default::default(),
            message: format!("degenerate bounding box {bw}x{bh}"),
        });
    }
    if bx < 0.0 || by < 0.0 || bx + bw > frame.width as f64 + 1e-9
        || by + bh > frame.height as f64 + 1e-9
    {
        return Err(Error::Image {
            path: Default::default(),
            message: format!(
                "bounding box ({bx},{by},{bw},{bh}) outside {}x{} frame",
                frame.width, frame.height
            ),
        });
    }

    let scale_x = bw / target as f64;
    let scale_y = bh / target as f64;
    let mut data = Vec::with_capacity(3 * target * target);
    for dy in 0..target {
        // Center-aligned mapping: identity when the box matches the target.
        let sy = by + (dy as f64 + 0.5) * scale_y - 0.5;
        for dx in 0..target {
            let sx = bx + (dx as f64 + 0.5) * scale_x - 0.5;
            let px = sample_bilinear(frame, sx, sy);
            for c in 0..3 {
                data.push(px[c].clamp(0.0, 1.0));
            }
        }
    }
    Frame::new(target, target, data)
}

fn sample_bilinear(frame: &Frame, x: f64, y: f64) -> [f64; 3] {
    let x = x.clamp(0.0, (frame.width - 1) as f64);
    let y = y.clamp(0.0, (frame.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(frame.width - 1);
    let y1 = (y0 + 1).min(frame.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = frame.pixel(x0, y0);
    let p01 = frame.pixel(x1, y0);
    let p10 = frame.pixel(x0, y1);
    let p11 = frame.pixel(x1, y1);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p01[c] * fx;
        let bottom = p10[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_frame(size: usize, value: f64) -> Frame {
        Frame::new(size, size, vec![value; 3 * size * size]).unwrap()
    }

    fn store_of(n: usize) -> FrameStore {
        let frames: Vec<Frame> = (0..n)
            .map(|i| flat_frame(CLIP_SIZE, (i % 256) as f64 / 255.0))
            .collect();
        FrameStore::from_frames("p0", &frames).unwrap()
    }

    #[test]
    fn forty_frames_give_two_clips() {
        let store = store_of(40);
        let clips = assemble_clips(&store, 25.0).unwrap();
        assert_eq!(clips.len(), 2);
        assert_eq!(clips[0].tensor.shape(), &[3, 16, 224, 224]);
    }

    #[test]
    fn clip_duration_at_25_fps_is_064() {
        let store = store_of(32);
        let clips = assemble_clips(&store, 25.0).unwrap();
        assert_eq!(clips[0].start_time, 0.0);
        assert!((clips[1].start_time - 0.64).abs() < 1e-12);
    }

    #[test]
    fn clip_k_starts_at_16k_over_fps() {
        let store = store_of(80);
        let clips = assemble_clips(&store, 25.0).unwrap();
        for (k, clip) in clips.iter().enumerate() {
            assert!((clip.start_time - 16.0 * k as f64 / 25.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_frames_error() {
        let store = store_of(15);
        assert!(assemble_clips(&store, 25.0).is_err());
    }

    #[test]
    fn clips_partition_the_frame_prefix() {
        let store = store_of(40);
        let clips = assemble_clips(&store, 25.0).unwrap();
        // Frame f of clip k must equal source frame 16k + f (red channel).
        let plane = CLIP_SIZE * CLIP_SIZE;
        for (k, clip) in clips.iter().enumerate() {
            for f in 0..CLIP_FRAMES {
                let got = clip.tensor.data()[f * plane];
                let want = store.frame(16 * k + f).data[0];
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn crop_resize_identity_on_full_frame() {
        let mut data = Vec::new();
        for i in 0..224 * 224 {
            let v = (i % 251) as f64 / 255.0;
            data.extend_from_slice(&[v, v * 0.5, 1.0 - v]);
        }
        let frame = Frame::new(224, 224, data).unwrap();
        let out = crop_resize(&frame, (0.0, 0.0, 224.0, 224.0), 224).unwrap();
        assert_eq!(out, frame);
    }

    #[test]
    fn constant_crop_stays_constant() {
        let frame = flat_frame(100, 0.6);
        let out = crop_resize(&frame, (10.0, 20.0, 37.0, 53.0), 224).unwrap();
        assert!(out.data.iter().all(|&v| (v - 0.6).abs() < 1e-12));
    }

    #[test]
    fn checkerboard_downsize_preserves_mean() {
        let size = 448;
        let mut data = Vec::new();
        for y in 0..size {
            for x in 0..size {
                let v = if (x + y) % 2 == 0 { 1.0 } else { 0.0 };
                data.extend_from_slice(&[v, v, v]);
            }
        }
        let frame = Frame::new(size, size, data).unwrap();
        let before = frame.data.iter().sum::<f64>() / frame.data.len() as f64;
        let out = crop_resize(&frame, (0.0, 0.0, 448.0, 448.0), 224).unwrap();
        let after = out.data.iter().sum::<f64>() / out.data.len() as f64;
        assert!((before - after).abs() < 1e-3, "{before} vs {after}");
    }

    #[test]
    fn degenerate_box_errors() {
        let frame = flat_frame(50, 0.5);
        assert!(crop_resize(&frame, (10.0, 10.0, 0.0, 5.0), 224).is_err());
        assert!(crop_resize(&frame, (40.0, 40.0, 20.0, 20.0), 224).is_err());
    }

    #[test]
    fn output_stays_in_unit_range() {
        let frame = flat_frame(64, 1.0);
        let out = crop_resize(&frame, (1.5, 1.5, 60.0, 60.0), 224).unwrap();
        assert!(out.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

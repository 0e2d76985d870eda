//! Dense coarse-to-fine Lucas-Kanade optical flow and per-clip magnitudes.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::video::{FlowClip, FrameClip, GrayPlane};

/// Lucas-Kanade parameters: pyramid depth, window, iterations per level, and
/// the structure-tensor determinant below which flow is forced to zero.
#[derive(Clone, Copy, Debug)]
pub struct FlowConfig {
    pub levels: usize,
    pub window_radius: usize,
    pub iterations: usize,
    pub min_det: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            levels: 3,
            window_radius: 2, // 5x5 window
            iterations: 3,
            min_det: 1e-9,
        }
    }
}

/// Per-pixel displacement field in pixels/frame.
#[derive(Clone, Debug)]
pub struct FlowField {
    pub u: GrayPlane,
    pub v: GrayPlane,
}

impl FlowField {
    pub fn magnitude(&self) -> GrayPlane {
        GrayPlane {
            width: self.u.width,
            height: self.u.height,
            data: self
                .u
                .data
                .iter()
                .zip(&self.v.data)
                .map(|(u, v)| (u * u + v * v).sqrt())
                .collect(),
        }
    }
}

/// Dense flow from `prev` to `next` with default parameters.
pub fn dense_flow(prev: &GrayPlane, next: &GrayPlane) -> Result<FlowField> {
    dense_flow_with(&FlowConfig::default(), prev, next)
}

pub fn dense_flow_with(cfg: &FlowConfig, prev: &GrayPlane, next: &GrayPlane) -> Result<FlowField> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::ShapeMismatch {
            context: "dense_flow",
            expected: format!("{}x{}", prev.width, prev.height),
            actual: format!("{}x{}", next.width, next.height),
        });
    }
    let prev_pyr = pyramid(prev, cfg.levels);
    let next_pyr = pyramid(next, cfg.levels);

    let coarsest = &prev_pyr[cfg.levels - 1];
    let mut u = vec![0.0; coarsest.width * coarsest.height];
    let mut v = vec![0.0; coarsest.width * coarsest.height];

    for level in (0..cfg.levels).rev() {
        let p = &prev_pyr[level];
        let n = &next_pyr[level];
        if level < cfg.levels - 1 {
            let (fu, fv) = upsample_pair(&u, &v, &prev_pyr[level + 1], p);
            u = fu;
            v = fv;
        }
        lk_refine(cfg, p, n, &mut u, &mut v);
    }

    let full = &prev_pyr[0];
    Ok(FlowField {
        u: GrayPlane {
            width: full.width,
            height: full.height,
            data: u,
        },
        v: GrayPlane {
            width: full.width,
            height: full.height,
            data: v,
        },
    })
}

/// Flow magnitudes for a clip: plane `f` holds |flow| from frame `f-1` to
/// frame `f`; plane 0 has no predecessor and stays zero.
pub fn flow_magnitude_clip(clip: &FrameClip) -> Result<FlowClip> {
    flow_magnitude_clip_with(&FlowConfig::default(), clip)
}

pub fn flow_magnitude_clip_with(cfg: &FlowConfig, clip: &FrameClip) -> Result<FlowClip> {
    let shape = clip.tensor.shape();
    if shape.len() != 4 || shape[0] != 3 {
        return Err(Error::ShapeMismatch {
            context: "flow_magnitude_clip",
            expected: "3xTxHxW".into(),
            actual: format!("{shape:?}"),
        });
    }
    let (frames, h, w) = (shape[1], shape[2], shape[3]);
    let plane = h * w;
    let data = clip.tensor.data();
    let luma_of = |f: usize| -> GrayPlane {
        let mut l = Vec::with_capacity(plane);
        for i in 0..plane {
            let r = data[f * plane + i];
            let g = data[frames * plane + f * plane + i];
            let b = data[2 * frames * plane + f * plane + i];
            l.push(0.299 * r + 0.587 * g + 0.114 * b);
        }
        GrayPlane {
            width: w,
            height: h,
            data: l,
        }
    };

    let mut out = vec![0.0; frames * plane];
    let mut prev = luma_of(0);
    for f in 1..frames {
        let next = luma_of(f);
        let field = dense_flow_with(cfg, &prev, &next)?;
        let mag = field.magnitude();
        out[f * plane..(f + 1) * plane].copy_from_slice(&mag.data);
        prev = next;
    }
    Ok(FlowClip {
        tensor: Tensor::new(vec![1, frames, h, w], out)?,
        start_time: clip.start_time,
        participant_id: clip.participant_id.clone(),
    })
}

fn pyramid(img: &GrayPlane, levels: usize) -> Vec<GrayPlane> {
    let mut pyr = vec![img.clone()];
    for _ in 1..levels {
        let last = pyr.last().unwrap();
        pyr.push(downsample(last));
    }
    pyr
}

/// 2x2 box-average downsampling.
fn downsample(img: &GrayPlane) -> GrayPlane {
    let w = (img.width / 2).max(1);
    let h = (img.height / 2).max(1);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let x0 = 2 * x;
            let y0 = 2 * y;
            let x1 = (x0 + 1).min(img.width - 1);
            let y1 = (y0 + 1).min(img.height - 1);
            data.push(
                (img.at(x0, y0) + img.at(x1, y0) + img.at(x0, y1) + img.at(x1, y1)) / 4.0,
            );
        }
    }
    GrayPlane {
        width: w,
        height: h,
        data,
    }
}

/// Nearest-neighbor upsampling of a flow field, doubling the displacements.
fn upsample_pair(
    u: &[f64],
    v: &[f64],
    coarse: &GrayPlane,
    fine: &GrayPlane,
) -> (Vec<f64>, Vec<f64>) {
    let mut fu = vec![0.0; fine.width * fine.height];
    let mut fv = vec![0.0; fine.width * fine.height];
    for y in 0..fine.height {
        let cy = (y / 2).min(coarse.height - 1);
        for x in 0..fine.width {
            let cx = (x / 2).min(coarse.width - 1);
            fu[y * fine.width + x] = 2.0 * u[cy * coarse.width + cx];
            fv[y * fine.width + x] = 2.0 * v[cy * coarse.width + cx];
        }
    }
    (fu, fv)
}

fn lk_refine(cfg: &FlowConfig, prev: &GrayPlane, next: &GrayPlane, u: &mut [f64], v: &mut [f64]) {
    let (w, h) = (prev.width, prev.height);
    let r = cfg.window_radius as isize;

    // Spatial gradients of prev (central differences, clamped edges).
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            ix[y * w + x] = (prev.at(xp, y) - prev.at(xm, y)) / 2.0;
            iy[y * w + x] = (prev.at(x, yp) - prev.at(x, ym)) / 2.0;
        }
    }

    // Window sums of the structure tensor (constant across iterations).
    let ixx: Vec<f64> = ix.iter().map(|a| a * a).collect();
    let ixy: Vec<f64> = ix.iter().zip(&iy).map(|(a, b)| a * b).collect();
    let iyy: Vec<f64> = iy.iter().map(|a| a * a).collect();
    let gxx = box_sum(&ixx, w, h, r);
    let gxy = box_sum(&ixy, w, h, r);
    let gyy = box_sum(&iyy, w, h, r);

    let mut it = vec![0.0; w * h];
    let mut ixt = vec![0.0; w * h];
    let mut iyt = vec![0.0; w * h];
    for _ in 0..cfg.iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let warped = sample(next, x as f64 + u[i], y as f64 + v[i]);
                it[i] = warped - prev.at(x, y);
            }
        }
        for i in 0..w * h {
            ixt[i] = ix[i] * it[i];
            iyt[i] = iy[i] * it[i];
        }
        let bx = box_sum(&ixt, w, h, r);
        let by = box_sum(&iyt, w, h, r);

        for i in 0..w * h {
            let det = gxx[i] * gyy[i] - gxy[i] * gxy[i];
            if det < cfg.min_det {
                u[i] = 0.0;
                v[i] = 0.0;
                continue;
            }
            // Solve G·d = -b.
            let du = (-bx[i] * gyy[i] + by[i] * gxy[i]) / det;
            let dv = (-by[i] * gxx[i] + bx[i] * gxy[i]) / det;
            u[i] += du;
            v[i] += dv;
        }
    }
}

/// Windowed sums with the window truncated at the borders; separable passes.
fn box_sum(src: &[f64], w: usize, h: usize, r: isize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dx in -r..=r {
                let xx = x as isize + dx;
                if xx >= 0 && xx < w as isize {
                    acc += src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy >= 0 && yy < h as isize {
                    acc += tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn sample(img: &GrayPlane, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    let bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

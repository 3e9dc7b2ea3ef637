//! Clips and the preprocessing pipeline: bilinear resize, square crop
//! augmentation, horizontal flip, segment sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const MIN_FRAME_EXTENT: usize = 8;

/// An ordered stack of equally sized u8 frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    frames: Vec<u8>,
    t_total: usize,
    height: usize,
    width: usize,
    channels: usize,
    pub fps: Option<f64>,
    pub id: String,
}

impl Clip {
    pub fn new(
        frames: Vec<u8>,
        t_total: usize,
        height: usize,
        width: usize,
        channels: usize,
        fps: Option<f64>,
        id: impl Into<String>,
    ) -> Result<Self> {
        if t_total == 0 {
            return Err(Error::EmptyClip);
        }
        if height < MIN_FRAME_EXTENT || width < MIN_FRAME_EXTENT {
            return Err(Error::Format(format!(
                "frame {height}x{width} below minimum {MIN_FRAME_EXTENT}x{MIN_FRAME_EXTENT}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("channels must be 1 or 3, got {channels}")));
        }
        if frames.len() != t_total * height * width * channels {
            return Err(Error::Format(format!(
                "payload {} bytes, expected {}",
                frames.len(),
                t_total * height * width * channels
            )));
        }
        Ok(Clip {
            frames,
            t_total,
            height,
            width,
            channels,
            fps,
            id: id.into(),
        })
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn frames(&self) -> &[u8] {
        &self.frames
    }

    /// Raw bytes of frame `t`, HxWxC row-major.
    pub fn frame(&self, t: usize) -> &[u8] {
        let n = self.height * self.width * self.channels;
        &self.frames[t * n..(t + 1) * n]
    }

    /// Frame `t` as grayscale f32 in [0,1]. RGB uses the luma weights
    /// 0.299/0.587/0.114.
    pub fn gray_frame(&self, t: usize) -> Vec<f32> {
        let f = self.frame(t);
        match self.channels {
            1 => f.iter().map(|&v| v as f32 / 255.0).collect(),
            _ => f
                .chunks_exact(3)
                .map(|px| {
                    (0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32) / 255.0
                })
                .collect(),
        }
    }

    /// Reversed frame order; same metadata.
    pub fn reversed(&self) -> Clip {
        let n = self.height * self.width * self.channels;
        let mut frames = Vec::with_capacity(self.frames.len());
        for t in (0..self.t_total).rev() {
            frames.extend_from_slice(&self.frames[t * n..(t + 1) * n]);
        }
        Clip {
            frames,
            ..self.clone()
        }
    }

    pub fn with_frames(&self, frames: Vec<u8>, t_total: usize) -> Result<Clip> {
        Clip::new(
            frames,
            t_total,
            self.height,
            self.width,
            self.channels,
            self.fps,
            self.id.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Resize/crop/flip configuration. `crop_sides` follow the ratios
/// 256:224:192:169 scaled to the canonical size.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub canonical_size: usize,
    pub crop_sides: Vec<usize>,
    pub hflip_prob: f64,
    pub mode: Mode,
}

pub const PAPER_CROP_SIDES: [usize; 4] = [256, 224, 192, 169];

impl PreprocessConfig {
    /// Train-mode config at canonical size `s`, crop sides scaled from
    /// the 256-based set and rounded to nearest int.
    pub fn train(s: usize) -> Self {
        let crop_sides = PAPER_CROP_SIDES
            .iter()
            .map(|&d| {
                let scaled = (d * s) as f64 / 256.0;
                libm::round(scaled) as usize
            })
            .collect();
        PreprocessConfig {
            canonical_size: s,
            crop_sides,
            hflip_prob: 0.5,
            mode: Mode::Train,
        }
    }

    pub fn eval(s: usize) -> Self {
        PreprocessConfig {
            canonical_size: s,
            crop_sides: alloc::vec![s],
            hflip_prob: 0.0,
            mode: Mode::Eval,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.crop_sides.is_empty() {
            return Err(Error::Config("crop_sides empty".into()));
        }
        for &d in &self.crop_sides {
            if d == 0 || d > self.canonical_size {
                return Err(Error::Config(format!(
                    "crop side {d} outside [1, {}]",
                    self.canonical_size
                )));
            }
        }
        Ok(())
    }
}

/// Bilinear resize with the align-corners-false convention: source
/// coordinate = (i + 0.5) * extent_ratio - 0.5, clamped to the frame.
pub fn resize_bilinear(
    frame: &[f32],
    h: usize,
    w: usize,
    c: usize,
    h2: usize,
    w2: usize,
) -> Vec<f32> {
    if h == h2 && w == w2 {
        return frame.to_vec();
    }
    let mut out = Vec::with_capacity(h2 * w2 * c);
    let sy = h as f32 / h2 as f32;
    let sx = w as f32 / w2 as f32;
    for oy in 0..h2 {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = fy as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f32;
        for ox in 0..w2 {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = fx as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f32;
            for ch in 0..c {
                let at = |y: usize, x: usize| frame[(y * w + x) * c + ch];
                let top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
                let bot = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
                out.push(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    out
}

/// Per-clip augmentation decisions, drawn once and applied to every
/// sampled frame so temporal coherence survives the augmentation.
struct AugPlan {
    crop_side: usize,
    off_y: usize,
    off_x: usize,
    flip: bool,
}

/// TSN input preparation: scale the short side to S, crop a square,
/// optionally flip, resize to SxS, scale to [0,1]. Returns [T,C,S,S].
pub fn preprocess(
    clip: &Clip,
    indices: &[usize],
    cfg: &PreprocessConfig,
    rng: &mut Rng,
) -> Result<Tensor<f32>> {
    cfg.validate()?;
    if indices.is_empty() {
        return Err(Error::EmptyClip);
    }
    let s = cfg.canonical_size;
    let (h, w, c) = (clip.height(), clip.width(), clip.channels());
    if h < MIN_FRAME_EXTENT || w < MIN_FRAME_EXTENT {
        return Err(Error::Format(format!("frame {h}x{w} too small")));
    }
    // short side to S, aspect preserved
    let (sh, sw) = if h <= w {
        (s, ((w * s) as f64 / h as f64 + 0.5) as usize)
    } else {
        (((h * s) as f64 / w as f64 + 0.5) as usize, s)
    };

    let plan = match cfg.mode {
        Mode::Train => {
            let crop_side = cfg.crop_sides[rng.below(cfg.crop_sides.len())];
            let off_y = rng.below(sh - crop_side + 1);
            let off_x = rng.below(sw - crop_side + 1);
            let flip = rng.chance(cfg.hflip_prob);
            AugPlan { crop_side, off_y, off_x, flip }
        }
        Mode::Eval => AugPlan {
            crop_side: s,
            off_y: (sh - s) / 2,
            off_x: (sw - s) / 2,
            flip: false,
        },
    };

    let t = indices.len();
    let mut out = Tensor::zeros(&[t, c, s, s]);
    let od = out.data_mut();
    for (ti, &fi) in indices.iter().enumerate() {
        if fi >= clip.t_total() {
            return Err(Error::InsufficientFrames { have: clip.t_total(), need: fi + 1 });
        }
        let frame: Vec<f32> = clip.frame(fi).iter().map(|&v| v as f32).collect();
        let scaled = resize_bilinear(&frame, h, w, c, sh, sw);
        // crop
        let d = plan.crop_side;
        let mut crop = Vec::with_capacity(d * d * c);
        for y in 0..d {
            let row = ((plan.off_y + y) * sw + plan.off_x) * c;
            crop.extend_from_slice(&scaled[row..row + d * c]);
        }
        if plan.flip {
            for y in 0..d {
                let row = &mut crop[y * d * c..(y + 1) * d * c];
                for x in 0..d / 2 {
                    for ch in 0..c {
                        row.swap(x * c + ch, (d - 1 - x) * c + ch);
                    }
                }
            }
        }
        let resized = resize_bilinear(&crop, d, d, c, s, s);
        // HWC -> CHW, scale to [0,1]
        for y in 0..s {
            for x in 0..s {
                for ch in 0..c {
                    od[((ti * c + ch) * s + y) * s + x] = resized[(y * s + x) * c + ch] / 255.0;
                }
            }
        }
    }
    Ok(out)
}

/// TSN segment sampling: split [0, L) into T equal spans and take each
/// span's central frame. Indices are strictly increasing.
pub fn sample_segments(clip: &Clip, t: usize) -> Result<Vec<usize>> {
    let l = clip.t_total();
    if t == 0 {
        return Err(Error::Config("segments must be positive".into()));
    }
    if l < t {
        return Err(Error::InsufficientFrames { have: l, need: t });
    }
    let mut indices = Vec::with_capacity(t);
    for k in 0..t {
        let start = k * l / t;
        let end = (k + 1) * l / t;
        indices.push(start + (end - start) / 2);
    }
    Ok(indices)
}

//! Flow-statistics benchmark classifier: dense optical flow, motion
//! boundary magnitudes, per-cell standard deviations, and a small MLP.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::Clip;
use crate::error::{Error, Result};
use crate::ops;
use crate::rng::Rng;
use crate::sgd::{sgd_step, Parameter, SgdConfig};
use crate::synth::MotionType;
use crate::tensor::Tensor;
use crate::trainer::LabeledClip;

/// Dense flow between two frames: u horizontal, v vertical, in
/// pixels/frame.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Cells per side of the feature grid (4 -> 16 features).
    pub grid: usize,
    pub hidden: usize,
    pub classes: usize,
    pub dropout_p: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Horn-Schunck smoothness weight.
    pub flow_alpha: f64,
    pub flow_iterations: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            grid: 4,
            hidden: 128,
            classes: 5,
            dropout_p: 0.2,
            epochs: 5,
            lr: 0.001,
            flow_alpha: 10.0,
            flow_iterations: 100,
        }
    }
}

impl BaselineConfig {
    pub fn feature_len(&self) -> usize {
        self.grid * self.grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0,1)", self.dropout_p)));
        }
        if self.grid == 0 || self.hidden == 0 || self.flow_iterations == 0 {
            return Err(Error::Config("grid, hidden and flow_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[inline]
fn at(img: &[f32], w: usize, y: usize, x: usize) -> f32 {
    img[y * w + x]
}

/// Horn-Schunck optical flow with fixed Jacobi iteration count.
/// Inputs are grayscale frames in [0,1] of equal size; internally they
/// are rescaled to 0..255 so alpha sits in intensity-gradient units.
pub fn estimate_flow(
    frame_a: &[f32],
    frame_b: &[f32],
    h: usize,
    w: usize,
    cfg: &BaselineConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    if frame_a.len() != h * w || frame_b.len() != h * w {
        return Err(Error::Shape(format!(
            "flow frames must both be {h}x{w} (got {} and {} px)",
            frame_a.len(),
            frame_b.len()
        )));
    }
    let n = h * w;
    // 2x2x2 cube derivative stencils; indices clamp at the borders.
    // 63.75 = 0.25 stencil weight times the 255 intensity rescale.
    let mut ex = vec![0f32; n];
    let mut ey = vec![0f32; n];
    let mut et = vec![0f32; n];
    for y in 0..h {
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x1 = (x + 1).min(w - 1);
            let i = y * w + x;
            ex[i] = 63.75
                * (at(frame_a, w, y, x1) - at(frame_a, w, y, x)
                    + at(frame_a, w, y1, x1) - at(frame_a, w, y1, x)
                    + at(frame_b, w, y, x1) - at(frame_b, w, y, x)
                    + at(frame_b, w, y1, x1) - at(frame_b, w, y1, x));
            ey[i] = 63.75
                * (at(frame_a, w, y1, x) - at(frame_a, w, y, x)
                    + at(frame_a, w, y1, x1) - at(frame_a, w, y, x1)
                    + at(frame_b, w, y1, x) - at(frame_b, w, y, x)
                    + at(frame_b, w, y1, x1) - at(frame_b, w, y, x1));
            et[i] = 63.75
                * (at(frame_b, w, y, x) - at(frame_a, w, y, x)
                    + at(frame_b, w, y, x1) - at(frame_a, w, y, x1)
                    + at(frame_b, w, y1, x) - at(frame_a, w, y1, x)
                    + at(frame_b, w, y1, x1) - at(frame_a, w, y1, x1));
        }
    }
    let alpha2 = (cfg.flow_alpha * cfg.flow_alpha) as f32;
    let mut u = vec![0f32; n];
    let mut v = vec![0f32; n];
    let mut u_next = vec![0f32; n];
    let mut v_next = vec![0f32; n];
    for _ in 0..cfg.flow_iterations {
        for y in 0..h {
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            for x in 0..w {
                let xm = x.saturating_sub(1);
                let xp = (x + 1).min(w - 1);
                let i = y * w + x;
                // Horn-Schunck neighbourhood average: 1/6 edges, 1/12 diagonals
                let ubar = (at(&u, w, ym, x) + at(&u, w, yp, x) + at(&u, w, y, xm) + at(&u, w, y, xp))
                    / 6.0
                    + (at(&u, w, ym, xm) + at(&u, w, ym, xp) + at(&u, w, yp, xm) + at(&u, w, yp, xp))
                        / 12.0;
                let vbar = (at(&v, w, ym, x) + at(&v, w, yp, x) + at(&v, w, y, xm) + at(&v, w, y, xp))
                    / 6.0
                    + (at(&v, w, ym, xm) + at(&v, w, ym, xp) + at(&v, w, yp, xm) + at(&v, w, yp, xp))
                        / 12.0;
                let t = (ex[i] * ubar + ey[i] * vbar + et[i])
                    / (alpha2 + ex[i] * ex[i] + ey[i] * ey[i]);
                u_next[i] = ubar - ex[i] * t;
                v_next[i] = vbar - ey[i] * t;
            }
        }
        core::mem::swap(&mut u, &mut u_next);
        core::mem::swap(&mut v, &mut v_next);
    }
    Ok(FlowField { u, v, height: h, width: w })
}

fn central_diff(img: &[f32], h: usize, w: usize, y: usize, x: usize, along_x: bool) -> f32 {
    if along_x {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        (at(img, w, y, x1) - at(img, w, y, x0)) / (x1 - x0).max(1) as f32
    } else {
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (at(img, w, y1, x) - at(img, w, y0, x)) / (y1 - y0).max(1) as f32
    }
}

/// Motion boundary magnitude: sqrt(u_x^2 + u_y^2 + v_x^2 + v_y^2) with
/// central differences (one-sided at the borders).
pub fn motion_boundaries(flow: &FlowField) -> Vec<f32> {
    let (h, w) = (flow.height, flow.width);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let ux = central_diff(&flow.u, h, w, y, x, true);
            let uy = central_diff(&flow.u, h, w, y, x, false);
            let vx = central_diff(&flow.v, h, w, y, x, true);
            let vy = central_diff(&flow.v, h, w, y, x, false);
            out.push(libm::sqrtf(ux * ux + uy * uy + vx * vx + vy * vy));
        }
    }
    out
}

/// Per-cell population standard deviations of a map partitioned into a
/// grid x grid layout; the last row/column absorbs any remainder.
pub fn grid_std(map: &[f32], h: usize, w: usize, grid: usize) -> Vec<f32> {
    let (ch, cw) = (h / grid, w / grid);
    let mut out = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        let y0 = gy * ch;
        let y1 = if gy + 1 == grid { h } else { (gy + 1) * ch };
        for gx in 0..grid {
            let x0 = gx * cw;
            let x1 = if gx + 1 == grid { w } else { (gx + 1) * cw };
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            let mut sum = 0.0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += at(map, w, y, x) as f64;
                }
            }
            let mean = sum / count;
            let mut var = 0.0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = at(map, w, y, x) as f64 - mean;
                    var += d * d;
                }
            }
            out.push(libm::sqrt(var / count) as f32);
        }
    }
    out
}

/// Feature vector of a clip: motion boundaries of each consecutive
/// frame pair, averaged over time, then per-cell std over the grid.
pub fn baseline_features(clip: &Clip, cfg: &BaselineConfig) -> Result<Vec<f32>> {
    cfg.validate()?;
    let t = clip.t_total();
    if t < 2 {
        return Err(Error::InsufficientFrames { have: t, need: 2 });
    }
    let (h, w) = (clip.height(), clip.width());
    let mut mean_mb = vec![0f32; h * w];
    let mut prev = clip.gray_frame(0);
    for ti in 1..t {
        let next = clip.gray_frame(ti);
        let flow = estimate_flow(&prev, &next, h, w, cfg)?;
        let mb = motion_boundaries(&flow);
        for (acc, v) in mean_mb.iter_mut().zip(&mb) {
            *acc += v;
        }
        prev = next;
    }
    let inv = 1.0 / (t - 1) as f32;
    for v in mean_mb.iter_mut() {
        *v *= inv;
    }
    Ok(grid_std(&mean_mb, h, w, cfg.grid))
}

/// The two-layer MLP over the 16-dim features.
#[derive(Debug, Clone)]
pub struct BaselineParams {
    pub params: Vec<Parameter<f32>>,
}

impl BaselineParams {
    pub fn init(cfg: &BaselineConfig, rng: &mut Rng) -> Self {
        let f = cfg.feature_len();
        let params = vec![
            Parameter::glorot("baseline.l1.weight", &[cfg.hidden, f], f, cfg.hidden, rng),
            Parameter::new("baseline.l1.bias", Tensor::zeros(&[cfg.hidden])),
            Parameter::glorot(
                "baseline.l2.weight",
                &[cfg.classes, cfg.hidden],
                cfg.hidden,
                cfg.classes,
                rng,
            ),
            Parameter::new("baseline.l2.bias", Tensor::zeros(&[cfg.classes])),
        ];
        BaselineParams { params }
    }
}

fn forward_mlp(
    feature: &Tensor<f32>,
    params: &BaselineParams,
    cfg: &BaselineConfig,
    rng: Option<&mut Rng>,
) -> Result<(Tensor<f32>, Tensor<f32>, Tensor<f32>, Vec<bool>)> {
    let z1 = ops::linear(feature, &params.params[0].value, &params.params[1].value)?;
    let a1 = ops::relu(&z1);
    let (dropped, mask) = match rng {
        Some(r) => ops::dropout(&a1, cfg.dropout_p, r, true)?,
        None => (a1.clone(), Vec::new()),
    };
    let logits = ops::linear(&dropped, &params.params[2].value, &params.params[3].value)?;
    Ok((z1, dropped, logits, mask))
}

/// Train the MLP on precomputed features with plain per-sample SGD.
pub fn train_baseline_on_features(
    features: &[Vec<f32>],
    labels: &[MotionType],
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineParams> {
    cfg.validate()?;
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Dataset(format!(
            "{} features vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let f_len = cfg.feature_len();
    let mut rng = Rng::new(seed);
    let mut params = BaselineParams::init(cfg, &mut rng);
    let sgd_cfg = SgdConfig {
        learning_rate: cfg.lr,
        momentum: 0.0,
        weight_decay: 0.0,
    };
    let mut order: Vec<usize> = (0..features.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for (bi, &i) in order.iter().enumerate() {
            if features[i].len() != f_len {
                return Err(Error::Shape(format!(
                    "feature {} has length {}, expected {f_len}",
                    i,
                    features[i].len()
                )));
            }
            let x = Tensor::new(&[f_len], features[i].clone())?;
            let (z1, dropped, logits, mask) = forward_mlp(&x, &params, cfg, Some(&mut rng))?;
            let target = labels[i].code() as usize;
            let (loss, probs) = ops::softmax_cross_entropy(&logits, target)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            let g_logits = ops::softmax_cross_entropy_backward(&probs, target);
            let (g_dropped, gw2, gb2) =
                ops::linear_backward(&dropped, &params.params[2].value, &g_logits)?;
            let g_a1 = ops::dropout_backward(&g_dropped, &mask, cfg.dropout_p);
            let g_z1 = ops::relu_backward(&z1, &g_a1);
            let (_, gw1, gb1) = ops::linear_backward(&x, &params.params[0].value, &g_z1)?;
            params.params[0].grad = gw1;
            params.params[1].grad = gb1;
            params.params[2].grad = gw2;
            params.params[3].grad = gb2;
            sgd_step(&mut params.params, &sgd_cfg)?;
        }
    }
    Ok(params)
}

/// Extract features for every clip, then train.
pub fn train_baseline(
    dataset: &[LabeledClip],
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineParams> {
    let mut features = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for lc in dataset {
        features.push(baseline_features(&lc.clip, cfg)?);
        labels.push(lc.label);
    }
    train_baseline_on_features(&features, &labels, cfg, seed)
}

pub fn predict_baseline_features(
    feature: &[f32],
    params: &BaselineParams,
    cfg: &BaselineConfig,
) -> Result<(MotionType, Tensor<f32>)> {
    let x = Tensor::new(&[cfg.feature_len()], feature.to_vec())?;
    let (_, _, logits, _) = forward_mlp(&x, params, cfg, None)?;
    let (_, probs) = ops::softmax_cross_entropy(&logits, 0)?;
    let class = MotionType::from_code(probs.argmax() as u8).expect("argmax in range");
    Ok((class, probs))
}

pub fn predict_baseline(
    clip: &Clip,
    params: &BaselineParams,
    cfg: &BaselineConfig,
) -> Result<(MotionType, Tensor<f32>)> {
    let feature = baseline_features(clip, cfg)?;
    predict_baseline_features(&feature, params, cfg)
}

//! Segment-based motion classifier: shared-weight strided-conv backbone
//! with temporal channel shifting between blocks, mean consensus over
//! segments, and a two-hidden-layer classifier head.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::{self, Clip, PreprocessConfig};
use crate::error::{Error, Result};
use crate::ops;
use crate::rng::Rng;
use crate::sgd::Parameter;
use crate::synth::MotionType;
use crate::tensor::{Scalar, Tensor};

pub const NUM_CLASSES: usize = 5;
const KERNEL: usize = 3;
const STRIDE: usize = 2;
const PAD: usize = 1;

/// Architecture description. Checkpoints carry this as a JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of temporal segments T.
    pub segments: usize,
    /// Input height and width after preprocessing.
    pub input_size: usize,
    pub input_channels: usize,
    /// Output channels of each conv block; the last entry is the
    /// feature dimension used for consensus and retrieval.
    pub block_widths: Vec<usize>,
    /// Fraction of channels shifted per direction between blocks.
    pub shift_fraction: f64,
    pub head_widths: [usize; 2],
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            segments: 3,
            input_size: 32,
            input_channels: 1,
            block_widths: vec![16, 32, 64, 128],
            shift_fraction: 0.125,
            head_widths: [128, 64],
            num_classes: NUM_CLASSES,
        }
    }
}

impl ModelConfig {
    pub fn feature_dim(&self) -> usize {
        *self.block_widths.last().expect("non-empty block widths")
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::Config("segments must be >= 1".into()));
        }
        if self.block_widths.is_empty() {
            return Err(Error::Config("block_widths empty".into()));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(Error::Config(format!(
                "num_classes must be {NUM_CLASSES}, got {}",
                self.num_classes
            )));
        }
        if self.input_channels != 1 && self.input_channels != 3 {
            return Err(Error::Config("input_channels must be 1 or 3".into()));
        }
        if !(0.0..=0.5).contains(&self.shift_fraction) {
            return Err(Error::Config(format!(
                "shift_fraction {} outside [0, 0.5]",
                self.shift_fraction
            )));
        }
        // every shifted block must move at least one channel when T > 1
        if self.segments > 1 && self.shift_fraction > 0.0 {
            for (b, &c_in) in self.block_widths[..self.block_widths.len() - 1]
                .iter()
                .enumerate()
            {
                let n = (self.shift_fraction * c_in as f64) as usize;
                if n < 1 {
                    return Err(Error::Config(format!(
                        "shift_fraction {} moves zero channels at block {} (width {c_in})",
                        self.shift_fraction,
                        b + 1
                    )));
                }
            }
        }
        // the stride chain must keep at least one spatial position
        let mut extent = self.input_size;
        for _ in &self.block_widths {
            extent = ops::conv_out_extent(extent, KERNEL, STRIDE, PAD).map_err(|_| {
                Error::Config(format!(
                    "input_size {} too small for {} conv blocks",
                    self.input_size,
                    self.block_widths.len()
                ))
            })?;
        }
        Ok(())
    }

    /// Spatial extent entering each block, plus the final extent.
    fn extents(&self) -> Vec<usize> {
        let mut v = vec![self.input_size];
        let mut e = self.input_size;
        for _ in &self.block_widths {
            e = (e + 2 * PAD - KERNEL) / STRIDE + 1;
            v.push(e);
        }
        v
    }
}

/// All learned weights, ordered block convs first, head layers last.
#[derive(Debug, Clone)]
pub struct ModelParams<E: Scalar = f32> {
    pub num_blocks: usize,
    pub params: Vec<Parameter<E>>,
}

impl<E: Scalar> ModelParams<E> {
    pub fn init(cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let mut params = Vec::new();
        let mut c_in = cfg.input_channels;
        for (b, &c_out) in cfg.block_widths.iter().enumerate() {
            // fan counted in channels: with 3x3 kernels and no
            // normalization layers, the per-weight count would shrink
            // activations by ~0.6 per block and underflow the 7-layer
            // pipeline; channel fan keeps the forward scale near 1
            params.push(Parameter::glorot(
                format!("block{b}.weight"),
                &[c_out, c_in, KERNEL, KERNEL],
                c_in,
                c_out,
                rng,
            ));
            params.push(Parameter::new(format!("block{b}.bias"), Tensor::zeros(&[c_out])));
            c_in = c_out;
        }
        let dims = [
            (cfg.feature_dim(), cfg.head_widths[0]),
            (cfg.head_widths[0], cfg.head_widths[1]),
            (cfg.head_widths[1], cfg.num_classes),
        ];
        for (j, &(f_in, f_out)) in dims.iter().enumerate() {
            params.push(Parameter::glorot(
                format!("head{j}.weight"),
                &[f_out, f_in],
                f_in,
                f_out,
                rng,
            ));
            params.push(Parameter::new(format!("head{j}.bias"), Tensor::zeros(&[f_out])));
        }
        Ok(ModelParams {
            num_blocks: cfg.block_widths.len(),
            params,
        })
    }

    /// Wrap parameters loaded from storage, checking that the names and
    /// shapes match what `init` would have produced for `cfg`.
    pub fn from_params(params: Vec<Parameter<E>>, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
        let mut c_in = cfg.input_channels;
        for (b, &c_out) in cfg.block_widths.iter().enumerate() {
            expected.push((format!("block{b}.weight"), vec![c_out, c_in, KERNEL, KERNEL]));
            expected.push((format!("block{b}.bias"), vec![c_out]));
            c_in = c_out;
        }
        let mut f_in = cfg.feature_dim();
        for (j, &f_out) in cfg
            .head_widths
            .iter()
            .chain(core::iter::once(&cfg.num_classes))
            .enumerate()
        {
            expected.push((format!("head{j}.weight"), vec![f_out, f_in]));
            expected.push((format!("head{j}.bias"), vec![f_out]));
            f_in = f_out;
        }
        if params.len() != expected.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} parameters, config expects {}",
                params.len(),
                expected.len()
            )));
        }
        for (p, (name, shape)) in params.iter().zip(&expected) {
            if &p.name != name || p.value.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "checkpoint parameter {:?} {:?} does not match expected {:?} {:?}",
                    p.name,
                    p.value.shape(),
                    name,
                    shape
                )));
            }
        }
        Ok(ModelParams {
            num_blocks: cfg.block_widths.len(),
            params,
        })
    }

    pub fn block(&self, b: usize) -> (&Parameter<E>, &Parameter<E>) {
        (&self.params[2 * b], &self.params[2 * b + 1])
    }

    pub fn head(&self, j: usize) -> (&Parameter<E>, &Parameter<E>) {
        let base = 2 * self.num_blocks;
        (&self.params[base + 2 * j], &self.params[base + 2 * j + 1])
    }

    fn grads_mut(&mut self, idx: usize) -> &mut Parameter<E> {
        &mut self.params[idx]
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.iter_mut() {
            p.zero_grad();
        }
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            num_blocks: self.num_blocks,
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.value.cast()))
                .collect(),
        }
    }
}

/// Shift the leading channel groups one segment backward/forward in
/// time. Channels [0,n) read from segment t-1, [n,2n) from t+1, the
/// rest stay. Boundary segments receive zeros. n = floor(frac * C).
pub fn temporal_shift<E: Scalar>(features: &Tensor<E>, frac: f64) -> Result<Tensor<E>> {
    let s = features.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("temporal_shift wants [T,C,H,W], got {:?}", s)));
    }
    let (t_n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let n = (frac * c as f64) as usize;
    if 2 * n > c {
        return Err(Error::Config(format!(
            "shift fraction {frac} moves {n}+{n} of {c} channels"
        )));
    }
    if n == 0 || t_n == 1 {
        return Ok(features.clone());
    }
    let hw = h * w;
    let mut out = Tensor::zeros(s);
    let src = features.data();
    let dst = out.data_mut();
    for t in 0..t_n {
        for ch in 0..c {
            let from_t = if ch < n {
                if t == 0 {
                    continue; // stays zero
                }
                t - 1
            } else if ch < 2 * n {
                if t + 1 == t_n {
                    continue;
                }
                t + 1
            } else {
                t
            };
            let d = (t * c + ch) * hw;
            let s0 = (from_t * c + ch) * hw;
            dst[d..d + hw].copy_from_slice(&src[s0..s0 + hw]);
        }
    }
    Ok(out)
}

/// Adjoint of [`temporal_shift`]: gradients flow the opposite way.
pub fn temporal_shift_backward<E: Scalar>(grad_out: &Tensor<E>, frac: f64) -> Result<Tensor<E>> {
    let s = grad_out.shape();
    let (t_n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let n = (frac * c as f64) as usize;
    if n == 0 || t_n == 1 {
        return Ok(grad_out.clone());
    }
    let hw = h * w;
    let mut out = Tensor::zeros(s);
    let src = grad_out.data();
    let dst = out.data_mut();
    for t in 0..t_n {
        for ch in 0..c {
            let from_t = if ch < n {
                if t + 1 == t_n {
                    continue;
                }
                t + 1
            } else if ch < 2 * n {
                if t == 0 {
                    continue;
                }
                t - 1
            } else {
                t
            };
            let d = (t * c + ch) * hw;
            let s0 = (from_t * c + ch) * hw;
            dst[d..d + hw].copy_from_slice(&src[s0..s0 + hw]);
        }
    }
    Ok(out)
}

/// Mean over the segment axis: [T,F] -> [F].
pub fn consensus<E: Scalar>(per_segment: &Tensor<E>) -> Result<Tensor<E>> {
    let s = per_segment.shape();
    if s.len() != 2 || s[0] == 0 {
        return Err(Error::Shape(format!("consensus wants [T,F] with T>=1, got {:?}", s)));
    }
    let (t_n, f) = (s[0], s[1]);
    let inv = E::from_f64(1.0 / t_n as f64);
    let mut out = vec![E::ZERO; f];
    for row in per_segment.data().chunks_exact(f) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o = *o * inv;
    }
    Tensor::new(&[f], out)
}

fn segment<E: Scalar>(x: &Tensor<E>, t: usize) -> Tensor<E> {
    let s = x.shape();
    let n = s[1] * s[2] * s[3];
    Tensor::new(&[s[1], s[2], s[3]], x.data()[t * n..(t + 1) * n].to_vec())
        .expect("consistent shape")
}

/// Everything the backward pass needs, kept per forward call.
pub struct ForwardCache<E: Scalar = f32> {
    /// Post-shift input to each block, [T,C,H,W].
    pub block_inputs: Vec<Tensor<E>>,
    /// Pre-relu conv output of each block, [T,C',H',W'].
    pub block_preact: Vec<Tensor<E>>,
    /// Per-segment pooled features, [T,F].
    pub segment_features: Tensor<E>,
    /// Consensus feature, [F].
    pub feature: Tensor<E>,
    /// Head inputs (pre-linear activations) and pre-relu outputs.
    pub head_inputs: Vec<Tensor<E>>,
    pub head_preact: Vec<Tensor<E>>,
    pub logits: Tensor<E>,
}

/// Full forward pass with caching: backbone, consensus, head.
pub fn forward_cached<E: Scalar>(
    input: &Tensor<E>,
    params: &ModelParams<E>,
    cfg: &ModelConfig,
) -> Result<ForwardCache<E>> {
    let s = input.shape();
    if s.len() != 4 || s[0] != cfg.segments || s[1] != cfg.input_channels {
        return Err(Error::Shape(format!(
            "input {:?}, expected [{},{},S,S]",
            s, cfg.segments, cfg.input_channels
        )));
    }
    let t_n = cfg.segments;
    let mut x = input.clone();
    let mut block_inputs = Vec::with_capacity(params.num_blocks);
    let mut block_preact = Vec::with_capacity(params.num_blocks);
    for b in 0..params.num_blocks {
        // the first block sees raw pixels and is not shifted
        let shifted = if b > 0 {
            temporal_shift(&x, cfg.shift_fraction)?
        } else {
            x.clone()
        };
        let (weight, bias) = params.block(b);
        let mut outs: Vec<Tensor<E>> = Vec::with_capacity(t_n);
        for t in 0..t_n {
            let seg = segment(&shifted, t);
            outs.push(ops::conv2d(&seg, &weight.value, &bias.value, STRIDE, PAD)?);
        }
        let os = outs[0].shape().to_vec();
        let mut pre = Tensor::zeros(&[t_n, os[0], os[1], os[2]]);
        {
            let n = os.iter().product::<usize>();
            let d = pre.data_mut();
            for (t, o) in outs.iter().enumerate() {
                d[t * n..(t + 1) * n].copy_from_slice(o.data());
            }
        }
        let activated = ops::relu(&pre);
        block_inputs.push(shifted);
        block_preact.push(pre);
        x = activated;
    }
    // global average pool per segment
    let f_dim = cfg.feature_dim();
    let mut segment_features = Tensor::zeros(&[t_n, f_dim]);
    for t in 0..t_n {
        let seg = segment(&x, t);
        let pooled = ops::global_avg_pool(&seg)?;
        segment_features.data_mut()[t * f_dim..(t + 1) * f_dim].copy_from_slice(pooled.data());
    }
    let feature = consensus(&segment_features)?;

    let mut head_inputs = Vec::with_capacity(3);
    let mut head_preact = Vec::with_capacity(2);
    let mut h = feature.clone();
    for j in 0..3 {
        let (weight, bias) = params.head(j);
        head_inputs.push(h.clone());
        let z = ops::linear(&h, &weight.value, &bias.value)?;
        if j < 2 {
            head_preact.push(z.clone());
            h = ops::relu(&z);
        } else {
            h = z;
        }
    }
    Ok(ForwardCache {
        block_inputs,
        block_preact,
        segment_features,
        feature,
        head_inputs,
        head_preact,
        logits: h,
    })
}

/// Backward pass. Accumulates `scale * grad` into every parameter's
/// grad buffer and returns the gradient w.r.t. the model input.
pub fn backward<E: Scalar>(
    cache: &ForwardCache<E>,
    grad_logits: &Tensor<E>,
    params: &mut ModelParams<E>,
    cfg: &ModelConfig,
    scale: f64,
) -> Result<Tensor<E>> {
    let sc = E::from_f64(scale);
    let t_n = cfg.segments;
    let base = 2 * params.num_blocks;

    // head
    let mut g = grad_logits.clone();
    for j in (0..3).rev() {
        if j < 2 {
            g = ops::relu_backward(&cache.head_preact[j], &g);
        }
        let weight_val = params.head(j).0.value.clone();
        let (gi, gw, gb) = ops::linear_backward(&cache.head_inputs[j], &weight_val, &g)?;
        accumulate(params.grads_mut(base + 2 * j), &gw, sc);
        accumulate(params.grads_mut(base + 2 * j + 1), &gb, sc);
        g = gi;
    }

    // consensus: mean over segments
    let f_dim = cfg.feature_dim();
    let inv_t = E::from_f64(1.0 / t_n as f64);
    let mut grad_segments = Tensor::zeros(&[t_n, f_dim]);
    for t in 0..t_n {
        for (i, &gv) in g.data().iter().enumerate() {
            grad_segments.data_mut()[t * f_dim + i] = gv * inv_t;
        }
    }

    // pool backward into [T,F,H,W] of the last block output
    let last_pre = &cache.block_preact[params.num_blocks - 1];
    let ls = last_pre.shape().to_vec();
    let (c_last, h_last, w_last) = (ls[1], ls[2], ls[3]);
    let mut grad_x = Tensor::zeros(&[t_n, c_last, h_last, w_last]);
    for t in 0..t_n {
        let gseg = Tensor::new(
            &[f_dim],
            grad_segments.data()[t * f_dim..(t + 1) * f_dim].to_vec(),
        )?;
        let gin = ops::global_avg_pool_backward(&[c_last, h_last, w_last], &gseg);
        let n = c_last * h_last * w_last;
        grad_x.data_mut()[t * n..(t + 1) * n].copy_from_slice(gin.data());
    }

    // blocks, in reverse
    for b in (0..params.num_blocks).rev() {
        let grad_act = ops::relu_backward(&cache.block_preact[b], &grad_x);
        let weight_val = params.block(b).0.value.clone();
        let input = &cache.block_inputs[b];
        let is = input.shape().to_vec();
        let seg_n = is[1] * is[2] * is[3];
        let mut grad_in = Tensor::zeros(&is);
        for t in 0..t_n {
            let seg_in = segment(input, t);
            let g_seg = segment(&grad_act, t);
            let (gi, gw, gb) = ops::conv2d_backward(&seg_in, &weight_val, STRIDE, PAD, &g_seg)?;
            accumulate(params.grads_mut(2 * b), &gw, sc);
            accumulate(params.grads_mut(2 * b + 1), &gb, sc);
            grad_in.data_mut()[t * seg_n..(t + 1) * seg_n].copy_from_slice(gi.data());
        }
        grad_x = if b > 0 {
            temporal_shift_backward(&grad_in, cfg.shift_fraction)?
        } else {
            grad_in
        };
    }
    Ok(grad_x)
}

fn accumulate<E: Scalar>(param: &mut Parameter<E>, grad: &Tensor<E>, scale: E) {
    for (g, &v) in param.grad.data_mut().iter_mut().zip(grad.data()) {
        *g += v * scale;
    }
}

/// Backbone only: preprocessed segments [T,C,S,S] -> per-segment
/// features [T,F].
pub fn backbone_forward<E: Scalar>(
    segments: &Tensor<E>,
    params: &ModelParams<E>,
    cfg: &ModelConfig,
) -> Result<Tensor<E>> {
    Ok(forward_cached(segments, params, cfg)?.segment_features)
}

/// Head + softmax over a consensus feature vector.
pub fn classify<E: Scalar>(
    feature: &Tensor<E>,
    params: &ModelParams<E>,
    cfg: &ModelConfig,
) -> Result<Tensor<E>> {
    let _ = cfg;
    let mut h = feature.clone();
    for j in 0..3 {
        let (weight, bias) = params.head(j);
        let z = ops::linear(&h, &weight.value, &bias.value)?;
        h = if j < 2 { ops::relu(&z) } else { z };
    }
    softmax(&h)
}

fn softmax<E: Scalar>(logits: &Tensor<E>) -> Result<Tensor<E>> {
    let mut max = logits.data()[0];
    for &v in logits.data() {
        max = max.maximum(v);
    }
    let mut sum = E::ZERO;
    let mut probs: Vec<E> = logits
        .data()
        .iter()
        .map(|&v| {
            let e = (v - max).exp();
            sum += e;
            e
        })
        .collect();
    for p in probs.iter_mut() {
        *p = *p / sum;
    }
    Tensor::new(logits.shape(), probs)
}

/// Consensus feature of a clip under eval preprocessing. This is the
/// vector the retrieval store indexes.
pub fn extract_feature(
    clip: &Clip,
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    pre_cfg: &PreprocessConfig,
) -> Result<Tensor<f32>> {
    let indices = clip::sample_segments(clip, cfg.segments)?;
    let input = clip::preprocess(clip, &indices, pre_cfg, &mut Rng::new(0))?;
    let cache = forward_cached(&input, params, cfg)?;
    Ok(cache.feature)
}

/// End-to-end prediction: segments, eval preprocessing, backbone,
/// consensus, head, argmax. Ties break toward the lowest class code.
pub fn predict(
    clip: &Clip,
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    pre_cfg: &PreprocessConfig,
) -> Result<(MotionType, Tensor<f32>)> {
    let indices = clip::sample_segments(clip, cfg.segments)?;
    let input = clip::preprocess(clip, &indices, pre_cfg, &mut Rng::new(0))?;
    let cache = forward_cached(&input, params, cfg)?;
    let probs = softmax(&cache.logits)?;
    let class = MotionType::from_code(probs.argmax() as u8).expect("argmax in range");
    Ok((class, probs))
}

/// MACs of one conv layer: C_out * C_in * k^2 * H_out * W_out.
pub fn conv_layer_macs(c_out: usize, c_in: usize, k: usize, h_out: usize, w_out: usize) -> u64 {
    (c_out * c_in * k * k * h_out * w_out) as u64
}

/// Per-layer multiply-accumulate counts. Shifts and relus are free.
#[derive(Debug, Clone)]
pub struct MacReport {
    /// (layer name, MACs). Conv entries are per segment.
    pub layers: Vec<(String, u64)>,
    pub backbone_per_segment: u64,
    /// backbone_per_segment * T
    pub backbone_total: u64,
    /// Head runs once on the consensus vector.
    pub head: u64,
    pub total: u64,
}

pub fn count_macs(cfg: &ModelConfig) -> Result<MacReport> {
    cfg.validate()?;
    let extents = cfg.extents();
    let mut layers = Vec::new();
    let mut per_segment = 0u64;
    let mut c_in = cfg.input_channels;
    for (b, &c_out) in cfg.block_widths.iter().enumerate() {
        let e = extents[b + 1];
        let macs = conv_layer_macs(c_out, c_in, KERNEL, e, e);
        layers.push((format!("block{b}.conv"), macs));
        per_segment += macs;
        c_in = c_out;
    }
    let f = cfg.feature_dim();
    let head_macs = [
        (cfg.head_widths[0] * f) as u64,
        (cfg.head_widths[1] * cfg.head_widths[0]) as u64,
        (cfg.num_classes * cfg.head_widths[1]) as u64,
    ];
    let mut head = 0u64;
    for (j, &m) in head_macs.iter().enumerate() {
        layers.push((format!("head{j}.linear"), m));
        head += m;
    }
    let backbone_total = per_segment * cfg.segments as u64;
    Ok(MacReport {
        layers,
        backbone_per_segment: per_segment,
        backbone_total,
        head,
        total: backbone_total + head,
    })
}

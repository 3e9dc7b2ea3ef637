//! Forward and backward passes for every layer type in the pipeline.
//!
//! Each op is a pair of free functions: `<op>` computes the output,
//! `<op>_backward` maps the upstream gradient to input/parameter
//! gradients given whatever the forward pass cached. There is no tape;
//! the models are fixed feedforward stacks and chain the calls by hand.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Output side length of a square conv: floor((n + 2*pad - k)/stride) + 1.
pub fn conv_out_extent(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Config("stride must be positive".into()));
    }
    if k > n + 2 * pad {
        return Err(Error::Shape(format!(
            "kernel {k} exceeds padded extent {}",
            n + 2 * pad
        )));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

/// Unfold input [C,H,W] into a [C*k*k, H_out*W_out] patch matrix.
fn im2col<E: Scalar>(
    input: &[E],
    c_in: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h_out: usize,
    w_out: usize,
) -> Vec<E> {
    let cols_n = h_out * w_out;
    let mut cols = vec![E::ZERO; c_in * k * k * cols_n];
    for ci in 0..c_in {
        for kh in 0..k {
            for kw in 0..k {
                let row = (ci * k + kh) * k + kw;
                let out_row = &mut cols[row * cols_n..(row + 1) * cols_n];
                for oh in 0..h_out {
                    let ih = (oh * stride + kh) as isize - pad as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    let src = &input[(ci * h + ih as usize) * w..];
                    for ow in 0..w_out {
                        let iw = (ow * stride + kw) as isize - pad as isize;
                        if iw >= 0 && (iw as usize) < w {
                            out_row[oh * w_out + ow] = src[iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add a patch matrix back into input layout.
fn col2im<E: Scalar>(
    cols: &[E],
    c_in: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h_out: usize,
    w_out: usize,
) -> Vec<E> {
    let cols_n = h_out * w_out;
    let mut out = vec![E::ZERO; c_in * h * w];
    for ci in 0..c_in {
        for kh in 0..k {
            for kw in 0..k {
                let row = (ci * k + kh) * k + kw;
                let col_row = &cols[row * cols_n..(row + 1) * cols_n];
                for oh in 0..h_out {
                    let ih = (oh * stride + kh) as isize - pad as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    let dst = (ci * h + ih as usize) * w;
                    for ow in 0..w_out {
                        let iw = (ow * stride + kw) as isize - pad as isize;
                        if iw >= 0 && (iw as usize) < w {
                            out[dst + iw as usize] += col_row[oh * w_out + ow];
                        }
                    }
                }
            }
        }
    }
    out
}

/// 2D cross-correlation with zero padding.
///
/// input [C_in,H,W], weight [C_out,C_in,k,k], bias [C_out] ->
/// [C_out,H_out,W_out].
pub fn conv2d<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<E>> {
    let (c_in, h, w) = expect_3d(input)?;
    let ws = weight.shape();
    if ws.len() != 4 || ws[1] != c_in || ws[2] != ws[3] {
        return Err(Error::Shape(format!(
            "conv weight shape {:?} incompatible with input channels {c_in}",
            ws
        )));
    }
    let (c_out, k) = (ws[0], ws[2]);
    if bias.shape() != [c_out] {
        return Err(Error::Shape(format!(
            "conv bias shape {:?}, expected [{c_out}]",
            bias.shape()
        )));
    }
    let h_out = conv_out_extent(h, k, stride, pad)?;
    let w_out = conv_out_extent(w, k, stride, pad)?;
    let cols_n = h_out * w_out;
    let rows = c_in * k * k;
    let cols = im2col(input.data(), c_in, h, w, k, stride, pad, h_out, w_out);

    let mut out = vec![E::ZERO; c_out * cols_n];
    let wd = weight.data();
    let bd = bias.data();
    for co in 0..c_out {
        let out_row = &mut out[co * cols_n..(co + 1) * cols_n];
        out_row.fill(bd[co]);
        for r in 0..rows {
            let wv = wd[co * rows + r];
            let col_row = &cols[r * cols_n..(r + 1) * cols_n];
            for (o, &c) in out_row.iter_mut().zip(col_row) {
                *o += wv * c;
            }
        }
    }
    Tensor::new(&[c_out, h_out, w_out], out)
}

/// Gradients of conv2d w.r.t. input, weight and bias.
pub fn conv2d_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    stride: usize,
    pad: usize,
    grad_out: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>)> {
    let (c_in, h, w) = expect_3d(input)?;
    let ws = weight.shape();
    let (c_out, k) = (ws[0], ws[2]);
    let gs = grad_out.shape();
    let (h_out, w_out) = (gs[1], gs[2]);
    let cols_n = h_out * w_out;
    let rows = c_in * k * k;
    let cols = im2col(input.data(), c_in, h, w, k, stride, pad, h_out, w_out);
    let gd = grad_out.data();
    let wd = weight.data();

    let mut grad_bias = vec![E::ZERO; c_out];
    let mut grad_weight = vec![E::ZERO; c_out * rows];
    let mut grad_cols = vec![E::ZERO; rows * cols_n];
    for co in 0..c_out {
        let g_row = &gd[co * cols_n..(co + 1) * cols_n];
        let mut acc = E::ZERO;
        for &g in g_row {
            acc += g;
        }
        grad_bias[co] = acc;
        for r in 0..rows {
            let col_row = &cols[r * cols_n..(r + 1) * cols_n];
            let mut dot = E::ZERO;
            for (&g, &c) in g_row.iter().zip(col_row) {
                dot += g * c;
            }
            grad_weight[co * rows + r] = dot;
            let wv = wd[co * rows + r];
            let gc_row = &mut grad_cols[r * cols_n..(r + 1) * cols_n];
            for (gc, &g) in gc_row.iter_mut().zip(g_row) {
                *gc += wv * g;
            }
        }
    }
    let grad_input = col2im(&grad_cols, c_in, h, w, k, stride, pad, h_out, w_out);
    Ok((
        Tensor::new(&[c_in, h, w], grad_input)?,
        Tensor::new(&[c_out, c_in, k, k], grad_weight)?,
        Tensor::new(&[c_out], grad_bias)?,
    ))
}

/// Elementwise max(x, 0).
pub fn relu<E: Scalar>(input: &Tensor<E>) -> Tensor<E> {
    input.map(|v| v.maximum(E::ZERO))
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward<E: Scalar>(input: &Tensor<E>, grad_out: &Tensor<E>) -> Tensor<E> {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > E::ZERO { g } else { E::ZERO })
        .collect();
    Tensor::new(input.shape(), data).expect("same shape")
}

/// weight [F_out,F_in] * input [F_in] + bias [F_out].
pub fn linear<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
) -> Result<Tensor<E>> {
    let ws = weight.shape();
    if ws.len() != 2 || input.shape() != [ws[1]] || bias.shape() != [ws[0]] {
        return Err(Error::Shape(format!(
            "linear shapes: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            ws,
            bias.shape()
        )));
    }
    let (f_out, f_in) = (ws[0], ws[1]);
    let mut out = vec![E::ZERO; f_out];
    let wd = weight.data();
    let xd = input.data();
    for (o, (row, &b)) in out
        .iter_mut()
        .zip(wd.chunks_exact(f_in).zip(bias.data()))
    {
        let mut acc = b;
        for (&wv, &x) in row.iter().zip(xd) {
            acc += wv * x;
        }
        *o = acc;
    }
    Tensor::new(&[f_out], out)
}

/// Gradients of linear w.r.t. input, weight and bias.
pub fn linear_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    grad_out: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>)> {
    let ws = weight.shape();
    let (f_out, f_in) = (ws[0], ws[1]);
    let wd = weight.data();
    let xd = input.data();
    let gd = grad_out.data();
    let mut grad_input = vec![E::ZERO; f_in];
    let mut grad_weight = vec![E::ZERO; f_out * f_in];
    for o in 0..f_out {
        let g = gd[o];
        let row = &wd[o * f_in..(o + 1) * f_in];
        let gw_row = &mut grad_weight[o * f_in..(o + 1) * f_in];
        for i in 0..f_in {
            grad_input[i] += row[i] * g;
            gw_row[i] = xd[i] * g;
        }
    }
    Ok((
        Tensor::new(&[f_in], grad_input)?,
        Tensor::new(&[f_out, f_in], grad_weight)?,
        Tensor::new(&[f_out], gd.to_vec())?,
    ))
}

/// Per-channel spatial mean: [C,H,W] -> [C].
pub fn global_avg_pool<E: Scalar>(input: &Tensor<E>) -> Result<Tensor<E>> {
    let (c, h, w) = expect_3d(input)?;
    let area = E::from_f64((h * w) as f64);
    let mut out = vec![E::ZERO; c];
    for (o, chan) in out.iter_mut().zip(input.data().chunks_exact(h * w)) {
        let mut acc = E::ZERO;
        for &v in chan {
            acc += v;
        }
        *o = acc / area;
    }
    Tensor::new(&[c], out)
}

pub fn global_avg_pool_backward<E: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<E>,
) -> Tensor<E> {
    let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let area = E::from_f64((h * w) as f64);
    let mut out = vec![E::ZERO; c * h * w];
    for (chan, &g) in out.chunks_exact_mut(h * w).zip(grad_out.data()) {
        chan.fill(g / area);
    }
    Tensor::new(&[c, h, w], out).expect("shape consistent")
}

/// Inverted dropout. Training: zero each element with probability p and
/// scale survivors by 1/(1-p). Eval: identity. Returns the output and
/// the keep mask (empty in eval mode) for the backward pass.
pub fn dropout<E: Scalar>(
    input: &Tensor<E>,
    p: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Tensor<E>, Vec<bool>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout p {p} outside [0,1)")));
    }
    if !training || p == 0.0 {
        return Ok((input.clone(), Vec::new()));
    }
    let scale = E::from_f64(1.0 / (1.0 - p));
    let mut mask = Vec::with_capacity(input.len());
    let data = input
        .data()
        .iter()
        .map(|&v| {
            let keep = !rng.chance(p);
            mask.push(keep);
            if keep {
                v * scale
            } else {
                E::ZERO
            }
        })
        .collect();
    Ok((Tensor::new(input.shape(), data)?, mask))
}

pub fn dropout_backward<E: Scalar>(grad_out: &Tensor<E>, mask: &[bool], p: f64) -> Tensor<E> {
    if mask.is_empty() {
        return grad_out.clone();
    }
    let scale = E::from_f64(1.0 / (1.0 - p));
    let data = grad_out
        .data()
        .iter()
        .zip(mask)
        .map(|(&g, &keep)| if keep { g * scale } else { E::ZERO })
        .collect();
    Tensor::new(grad_out.shape(), data).expect("same shape")
}

/// Numerically stable softmax + negative log likelihood.
///
/// Returns (loss, probs). The gradient of the loss w.r.t. the logits is
/// probs - onehot(target), see [`softmax_cross_entropy_backward`].
pub fn softmax_cross_entropy<E: Scalar>(
    logits: &Tensor<E>,
    target_class: usize,
) -> Result<(E, Tensor<E>)> {
    let k = logits.len();
    if target_class >= k {
        return Err(Error::Label(format!(
            "target class {target_class} out of range for {k} classes"
        )));
    }
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
    let loss = -(probs[target_class].ln());
    Ok((loss, Tensor::new(&[k], probs)?))
}

pub fn softmax_cross_entropy_backward<E: Scalar>(probs: &Tensor<E>, target_class: usize) -> Tensor<E> {
    let mut grad = probs.clone();
    grad.data_mut()[target_class] = grad.data()[target_class] - E::ONE;
    grad
}

fn expect_3d<E: Scalar>(t: &Tensor<E>) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(Error::Shape(format!("expected rank-3 tensor, got {:?}", s)));
    }
    Ok((s[0], s[1], s[2]))
}

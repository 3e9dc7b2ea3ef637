//! Finite-difference verification of analytic gradients.
//!
//! All checks run in f64; central differences in f32 drown in rounding
//! noise. The production ops are generic over the element type, so the
//! exact code paths being trained are the ones verified here.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Compare analytic gradients against central differences.
///
/// `f` maps the inputs to a scalar loss plus the analytic gradient of
/// that loss w.r.t. each input. Returns the max over all elements of
/// |a - n| / max(|a|, |n|, 1e-8).
pub fn grad_check<F>(inputs: &[Tensor<f64>], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<(f64, Vec<Tensor<f64>>)>,
{
    let (loss, analytic) = f(inputs)?;
    if !loss.is_finite() {
        return Err(Error::Numerical("non-finite loss in grad_check".into()));
    }
    let mut max_err = 0.0f64;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (ti, grad) in analytic.iter().enumerate() {
        for ei in 0..grad.len() {
            let orig = work[ti].data()[ei];
            work[ti].data_mut()[ei] = orig + eps;
            let (lp, _) = f(&work)?;
            work[ti].data_mut()[ei] = orig - eps;
            let (lm, _) = f(&work)?;
            work[ti].data_mut()[ei] = orig;
            if !lp.is_finite() || !lm.is_finite() {
                return Err(Error::Numerical("non-finite perturbed loss".into()));
            }
            let numeric = (lp - lm) / (2.0 * eps);
            let a = grad.data()[ei];
            let err = libm::fabs(a - numeric)
                / libm::fabs(a).max(libm::fabs(numeric)).max(1e-8);
            if err > max_err {
                max_err = err;
            }
        }
    }
    Ok(max_err)
}

/// Reduce a tensor-valued op to a scalar via a fixed random projection
/// so its full Jacobian is exercised by a single loss.
fn project(out: &Tensor<f64>, proj: &Tensor<f64>) -> f64 {
    out.data()
        .iter()
        .zip(proj.data())
        .map(|(&a, &b)| a * b)
        .sum()
}

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    Tensor::new(shape, data).expect("consistent shape")
}

/// One named check in the standard suite.
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
}

/// Run the gradient suite over every differentiable op: conv2d, linear,
/// relu, global_avg_pool, softmax_cross_entropy, temporal_shift and the
/// composed segment model. Thresholding is the caller's business.
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = Rng::new(seed);
    let mut results = Vec::new();

    // conv2d: random 2x5x5 input, 3x2x3x3 weight, stride 1 pad 1
    {
        let input = random_tensor(&[2, 5, 5], &mut rng);
        let weight = random_tensor(&[3, 2, 3, 3], &mut rng);
        let bias = random_tensor(&[3], &mut rng);
        let proj = random_tensor(&[3, 5, 5], &mut rng);
        let err = grad_check(&[input, weight, bias], DEFAULT_EPS, |xs| {
            let out = ops::conv2d(&xs[0], &xs[1], &xs[2], 1, 1)?;
            let (gi, gw, gb) = ops::conv2d_backward(&xs[0], &xs[1], 1, 1, &proj)?;
            Ok((project(&out, &proj), alloc::vec![gi, gw, gb]))
        })?;
        results.push(CheckResult { name: "conv2d".into(), max_rel_error: err });
    }

    // conv2d strided, as used by the backbone
    {
        let input = random_tensor(&[2, 6, 6], &mut rng);
        let weight = random_tensor(&[3, 2, 3, 3], &mut rng);
        let bias = random_tensor(&[3], &mut rng);
        let proj = random_tensor(&[3, 3, 3], &mut rng);
        let err = grad_check(&[input, weight, bias], DEFAULT_EPS, |xs| {
            let out = ops::conv2d(&xs[0], &xs[1], &xs[2], 2, 1)?;
            let (gi, gw, gb) = ops::conv2d_backward(&xs[0], &xs[1], 2, 1, &proj)?;
            Ok((project(&out, &proj), alloc::vec![gi, gw, gb]))
        })?;
        results.push(CheckResult { name: "conv2d_stride2".into(), max_rel_error: err });
    }

    // linear: random 8 -> 3
    {
        let input = random_tensor(&[8], &mut rng);
        let weight = random_tensor(&[3, 8], &mut rng);
        let bias = random_tensor(&[3], &mut rng);
        let proj = random_tensor(&[3], &mut rng);
        let err = grad_check(&[input, weight, bias], DEFAULT_EPS, |xs| {
            let out = ops::linear(&xs[0], &xs[1], &xs[2])?;
            let (gi, gw, gb) = ops::linear_backward(&xs[0], &xs[1], &proj)?;
            Ok((project(&out, &proj), alloc::vec![gi, gw, gb]))
        })?;
        results.push(CheckResult { name: "linear".into(), max_rel_error: err });
    }

    // relu, inputs bounded away from the kink at 0
    {
        let data: Vec<f64> = (0..32)
            .map(|_| {
                let v = rng.uniform(1e-3, 1.0);
                if rng.chance(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let input = Tensor::new(&[32], data)?;
        let proj = random_tensor(&[32], &mut rng);
        let err = grad_check(core::slice::from_ref(&input), DEFAULT_EPS, |xs| {
            let out = ops::relu(&xs[0]);
            let gi = ops::relu_backward(&xs[0], &proj);
            Ok((project(&out, &proj), alloc::vec![gi]))
        })?;
        results.push(CheckResult { name: "relu".into(), max_rel_error: err });
    }

    // global_avg_pool
    {
        let input = random_tensor(&[3, 4, 4], &mut rng);
        let proj = random_tensor(&[3], &mut rng);
        let err = grad_check(core::slice::from_ref(&input), DEFAULT_EPS, |xs| {
            let out = ops::global_avg_pool(&xs[0])?;
            let gi = ops::global_avg_pool_backward(xs[0].shape(), &proj);
            Ok((project(&out, &proj), alloc::vec![gi]))
        })?;
        results.push(CheckResult { name: "global_avg_pool".into(), max_rel_error: err });
    }

    // softmax cross entropy
    {
        let logits = random_tensor(&[5], &mut rng);
        let err = grad_check(core::slice::from_ref(&logits), DEFAULT_EPS, |xs| {
            let (loss, probs) = ops::softmax_cross_entropy(&xs[0], 2)?;
            let g = ops::softmax_cross_entropy_backward(&probs, 2);
            Ok((loss, alloc::vec![g]))
        })?;
        results.push(CheckResult { name: "softmax_cross_entropy".into(), max_rel_error: err });
    }

    // temporal shift
    {
        let input = random_tensor(&[3, 8, 2, 2], &mut rng);
        let proj = random_tensor(&[3, 8, 2, 2], &mut rng);
        let err = grad_check(core::slice::from_ref(&input), DEFAULT_EPS, |xs| {
            let out = crate::model::temporal_shift(&xs[0], 0.25)?;
            let gi = crate::model::temporal_shift_backward(&proj, 0.25)?;
            Ok((project(&out, &proj), alloc::vec![gi]))
        })?;
        results.push(CheckResult { name: "temporal_shift".into(), max_rel_error: err });
    }

    // the full segment model end to end, tiny configuration
    {
        let cfg = crate::model::ModelConfig {
            segments: 2,
            input_size: 8,
            input_channels: 1,
            block_widths: alloc::vec![8, 16],
            shift_fraction: 0.25,
            head_widths: [8, 6],
            num_classes: 5,
        };
        let mut init_rng = Rng::new(rng.next_u64());
        let params64: crate::model::ModelParams<f64> =
            crate::model::ModelParams::init(&cfg, &mut init_rng)?;
        let mut inputs: Vec<Tensor<f64>> = alloc::vec![random_tensor(&[2, 1, 8, 8], &mut rng)];
        let names: Vec<String> = params64.params.iter().map(|p| p.name.clone()).collect();
        for p in &params64.params {
            inputs.push(p.value.clone());
        }
        // smaller step than the per-op checks: the composed net has
        // hundreds of relu preactivations, and a perturbation that
        // pushes one across zero invalidates the central difference;
        // a tighter step keeps the crossing band negligible
        let err = grad_check(&inputs, DEFAULT_EPS * 0.1, |xs| {
            let mut params = params64.clone();
            for (p, x) in params.params.iter_mut().zip(&xs[1..]) {
                p.value = x.clone();
                p.zero_grad();
            }
            let fwd = crate::model::forward_cached(&xs[0], &params, &cfg)?;
            let (loss, probs) = ops::softmax_cross_entropy(&fwd.logits, 1)?;
            let grad_logits = ops::softmax_cross_entropy_backward(&probs, 1);
            let grad_input =
                crate::model::backward(&fwd, &grad_logits, &mut params, &cfg, 1.0)?;
            let mut grads = alloc::vec![grad_input];
            for name in &names {
                let p = params
                    .params
                    .iter()
                    .find(|p| &p.name == name)
                    .expect("param present");
                grads.push(p.grad.clone());
            }
            Ok((loss, grads))
        })?;
        results.push(CheckResult { name: "model_end_to_end".into(), max_rel_error: err });
    }

    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_within_tolerance() {
        for r in run_suite(1234).unwrap() {
            // the composed model accumulates truncation error from many
            // layers, so it gets the overall budget instead of per-op
            let tol = if r.name == "model_end_to_end" { 1e-5 } else { 1e-6 };
            assert!(
                r.max_rel_error <= tol,
                "{} rel error {}",
                r.name,
                r.max_rel_error
            );
        }
    }
}

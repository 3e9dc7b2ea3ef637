//! Learnable parameters and the SGD-with-momentum update.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// A named weight tensor with its gradient and momentum buffer.
#[derive(Debug, Clone)]
pub struct Parameter<E: Scalar = f32> {
    pub name: String,
    pub value: Tensor<E>,
    pub grad: Tensor<E>,
    pub momentum_buffer: Tensor<E>,
}

impl<E: Scalar> Parameter<E> {
    pub fn new(name: impl Into<String>, value: Tensor<E>) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(&shape),
            momentum_buffer: Tensor::zeros(&shape),
        }
    }

    /// Glorot-uniform init: U(-b, b) with b = sqrt(6/(fan_in+fan_out)).
    pub fn glorot(
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let n: usize = shape.iter().product();
        let data: Vec<E> = (0..n)
            .map(|_| E::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Parameter::new(name, Tensor::new(shape, data).expect("consistent shape"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(E::ZERO);
    }
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// One momentum-SGD update over all parameters. Weight decay is folded
/// into the gradient: g' = g + wd*value; buf = m*buf + g'; value -= lr*buf.
pub fn sgd_step<E: Scalar>(params: &mut [Parameter<E>], cfg: &SgdConfig) -> Result<()> {
    cfg.validate()?;
    let lr = E::from_f64(cfg.learning_rate);
    let momentum = E::from_f64(cfg.momentum);
    let wd = E::from_f64(cfg.weight_decay);
    for p in params {
        let value = p.value.data_mut();
        let grad = p.grad.data();
        let buf = p.momentum_buffer.data_mut();
        for i in 0..value.len() {
            let g = grad[i] + wd * value[i];
            buf[i] = momentum * buf[i] + g;
            value[i] = value[i] - lr * buf[i];
        }
    }
    Ok(())
}

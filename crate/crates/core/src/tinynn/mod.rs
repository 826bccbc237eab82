//! Small hand-differentiated layers for the policy and servo networks.
//!
//! Layers process one sample at a time. `forward` caches what `backward`
//! needs; `backward` adds into parameter gradients, so a minibatch is a loop
//! of forward/backward pairs followed by one optimizer step.

pub mod activation;
pub mod adam;
pub mod batch;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod loss;

pub use activation::{Relu, Sigmoid};
pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use conv::Conv3x3;
pub use dense::Dense;
pub use gradcheck::{gradient_check, gradient_check_report, GradCheck};
pub use gru::Gru;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Uniform in `(-scale, scale)`.
    pub fn uniform(shape: &[usize], scale: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Dimension(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(&value.shape);
        Param { value, grad }
    }
}

/// Glorot-style uniform bound.
pub fn glorot_scale(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub trait Layer {
    fn kind(&self) -> &'static str;
    fn forward(&mut self, x: &Tensor) -> Result<Tensor>;
    /// Gradient with respect to the last forward input. Parameter gradients
    /// accumulate.
    fn backward(&mut self, dy: &Tensor) -> Result<Tensor>;
    /// See [`Module::relu_pattern`].
    fn relu_pattern(&self) -> Vec<bool> {
        Vec::new()
    }
    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

/// Anything that exposes a flat, ordered list of parameters.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn scale_grad(&mut self, s: f64) {
        for p in self.params_mut() {
            p.grad.data.iter_mut().for_each(|g| *g *= s);
        }
    }

    /// Signs of every ReLU input from the last forward pass. Gradient
    /// checks use it to spot perturbations that cross a kink.
    fn relu_pattern(&self) -> Vec<bool> {
        Vec::new()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

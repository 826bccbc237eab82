use serde::{Deserialize, Serialize};

use super::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(1e-3)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Bias-corrected update of every parameter from its gradient.
    pub fn update(&mut self, params: Vec<&mut Param>) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || params.iter().zip(&self.m).any(|(p, m)| p.value.len() != m.len()) {
            return Err(Error::Dimension("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..m.len() {
                let g = p.grad.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.value.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tensor;
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Param::new(Tensor::vector(vec![1.0, -2.0]));
        let mut a = Adam::default();
        for _ in 0..5 {
            a.update(vec![&mut p]).unwrap();
        }
        assert_eq!(p.value.data, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new(Tensor::vector(vec![0.5]));
        p.grad.data[0] = 1.0;
        let mut a = Adam::default();
        a.update(vec![&mut p]).unwrap();
        // m̂ = 1, v̂ = 1: step = lr / (1 + eps).
        assert!((0.5 - p.value.data[0] - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn shape_change_is_rejected() {
        let mut p = Param::new(Tensor::vector(vec![0.0; 2]));
        let mut a = Adam::default();
        a.update(vec![&mut p]).unwrap();
        let mut q = Param::new(Tensor::vector(vec![0.0; 3]));
        assert!(a.update(vec![&mut q]).is_err());
    }
}

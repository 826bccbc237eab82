use rand::Rng;

use super::{Layer, Module, Param, Tensor};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flipped a ReLU, where central
    /// differences do not estimate the derivative.
    pub skipped: usize,
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter of `model`.
///
/// `loss(model, backward)` must run a forward pass and return the scalar
/// loss; when `backward` is true it must also accumulate parameter gradients.
pub fn gradient_check<M: Module + ?Sized>(model: &mut M, loss: impl FnMut(&mut M, bool) -> Result<f64>) -> Result<f64> {
    Ok(gradient_check_report(model, loss)?.max_rel_error)
}

pub fn gradient_check_report<M: Module + ?Sized>(
    model: &mut M,
    mut loss: impl FnMut(&mut M, bool) -> Result<f64>,
) -> Result<GradCheck> {
    model.zero_grad();
    loss(model, true)?;
    let pattern = model.relu_pattern();
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data.clone()).collect();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = model.params_mut()[pi].value.data[j];
            model.params_mut()[pi].value.data[j] = orig + FD_STEP;
            let up = loss(model, false)?;
            let smooth_up = model.relu_pattern() == pattern;
            model.params_mut()[pi].value.data[j] = orig - FD_STEP;
            let down = loss(model, false)?;
            let smooth_down = model.relu_pattern() == pattern;
            model.params_mut()[pi].value.data[j] = orig;
            if !(smooth_up && smooth_down) {
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            let e = relative_error(a, (up - down) / (2.0 * FD_STEP));
            report.max_rel_error = report.max_rel_error.max(e);
        }
    }
    Ok(report)
}

/// A single layer under a fixed random linear read-out, so its gradients can
/// be checked in isolation.
pub struct Probe<'a> {
    pub layer: &'a mut dyn Layer,
    pub input: Tensor,
    pub readout: Vec<f64>,
}

impl Module for Probe<'_> {
    fn params(&self) -> Vec<&Param> {
        self.layer.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layer.params_mut()
    }

    fn relu_pattern(&self) -> Vec<bool> {
        self.layer.relu_pattern()
    }
}

impl<'a> Probe<'a> {
    pub fn new(layer: &'a mut dyn Layer, input: Tensor, rng: &mut impl Rng) -> Result<Self> {
        let n = layer.forward(&input)?.len();
        let readout = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(Probe { layer, input, readout })
    }

    fn loss(&mut self, backward: bool) -> Result<(f64, Option<Tensor>)> {
        let y = self.layer.forward(&self.input)?;
        let l = y.data.iter().zip(&self.readout).map(|(a, b)| a * b).sum();
        let dx = if backward {
            let dy = Tensor::new(&y.shape, self.readout.clone())?;
            Some(self.layer.backward(&dy)?)
        } else {
            None
        };
        Ok((l, dx))
    }

    /// Worst relative error over the parameters and the input gradient.
    pub fn check(&mut self) -> Result<f64> {
        let params = gradient_check(self, |p, bw| Ok(p.loss(bw)?.0))?;
        self.zero_grad();
        let dx = self.loss(true)?.1.expect("backward requested");
        let mut worst = params;
        for j in 0..self.input.len() {
            let orig = self.input.data[j];
            self.input.data[j] = orig + FD_STEP;
            let up = self.loss(false)?.0;
            self.input.data[j] = orig - FD_STEP;
            let down = self.loss(false)?.0;
            self.input.data[j] = orig;
            worst = worst.max(relative_error(dx.data[j], (up - down) / (2.0 * FD_STEP)));
        }
        Ok(worst)
    }
}

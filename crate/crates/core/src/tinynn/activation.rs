use super::{Layer, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Layer for Relu {
    fn kind(&self) -> &'static str {
        "Relu"
    }

    fn relu_pattern(&self) -> Vec<bool> {
        self.input
            .as_ref()
            .map_or_else(Vec::new, |x| x.data.iter().map(|v| *v > 0.0).collect())
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.input = Some(x.clone());
        Ok(Tensor {
            shape: x.shape.clone(),
            data: x.data.iter().map(|v| v.max(0.0)).collect(),
        })
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or(Error::BackwardBeforeForward)?;
        dy.expect_shape(&x.shape, "relu upstream")?;
        Ok(Tensor {
            shape: x.shape.clone(),
            data: x
                .data
                .iter()
                .zip(&dy.data)
                .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    output: Option<Tensor>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Layer for Sigmoid {
    fn kind(&self) -> &'static str {
        "Sigmoid"
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = Tensor {
            shape: x.shape.clone(),
            data: x.data.iter().map(|v| sigmoid(*v)).collect(),
        };
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let y = self.output.as_ref().ok_or(Error::BackwardBeforeForward)?;
        dy.expect_shape(&y.shape, "sigmoid upstream")?;
        Ok(Tensor {
            shape: y.shape.clone(),
            data: y.data.iter().zip(&dy.data).map(|(s, g)| g * s * (1.0 - s)).collect(),
        })
    }
}

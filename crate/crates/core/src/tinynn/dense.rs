use rand::Rng;

use super::{glorot_scale, Layer, Param, Tensor};
use crate::error::{Error, Result};

/// `y = W x + b` with `W` stored row-major as `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
    #[doc(hidden)]
    pub fault_transposed_grad: bool,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let s = glorot_scale(inputs, outputs);
        Self::from_parts(Tensor::uniform(&[outputs, inputs], s, rng), Tensor::zeros(&[outputs]))
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        Dense {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
            fault_transposed_grad: false,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape[0]
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "Dense"
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (o, n) = (self.outputs(), self.inputs());
        if x.len() != n {
            return Err(Error::Dimension(format!("dense expects {n} inputs, got {}", x.len())));
        }
        let w = &self.weight.value.data;
        let y = (0..o)
            .map(|i| {
                let row = &w[i * n..(i + 1) * n];
                self.bias.value.data[i] + row.iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        self.input = Some(x.clone());
        Ok(Tensor::vector(y))
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let (o, n) = (self.outputs(), self.inputs());
        if dy.len() != o {
            return Err(Error::Dimension(format!(
                "dense upstream has {} values, expected {o}",
                dy.len()
            )));
        }
        let w = &self.weight.value.data;
        let gw = &mut self.weight.grad.data;
        let mut dx = vec![0.0; n];
        for i in 0..o {
            let g = dy.data[i];
            self.bias.grad.data[i] += g;
            if g == 0.0 {
                continue;
            }
            for j in 0..n {
                if self.fault_transposed_grad {
                    // Wrong layout: treats W as [in, out].
                    gw[(j * o + i) % (o * n)] += g * x.data[j];
                } else {
                    gw[i * n + j] += g * x.data[j];
                }
                dx[j] += w[i * n + j] * g;
            }
        }
        Ok(Tensor {
            shape: x.shape.clone(),
            data: dx,
        })
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_weights_pass_through() {
        let mut eye = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            eye.data[i * 4 + i] = 1.0;
        }
        let mut d = Dense::from_parts(eye, Tensor::zeros(&[4]));
        let x = Tensor::vector(vec![1.0, -2.0, 3.5, 0.25]);
        assert_eq!(d.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut r = rng::stream(0, &[]);
        let mut d = Dense::new(5, 3, &mut r);
        d.forward(&Tensor::vector(vec![1.0; 5])).unwrap();
        let dx = d.backward(&Tensor::zeros(&[3])).unwrap();
        assert!(dx.data.iter().all(|v| *v == 0.0));
        assert!(d.weight.grad.data.iter().all(|v| *v == 0.0));
        assert!(d.bias.grad.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_needs_forward() {
        let mut r = rng::stream(0, &[]);
        let mut d = Dense::new(2, 2, &mut r);
        assert!(matches!(
            d.backward(&Tensor::zeros(&[2])),
            Err(Error::BackwardBeforeForward)
        ));
    }

    #[test]
    fn wrong_input_size_is_dimension_error() {
        let mut r = rng::stream(0, &[]);
        let mut d = Dense::new(3, 2, &mut r);
        assert!(matches!(d.forward(&Tensor::zeros(&[4])), Err(Error::Dimension(_))));
    }
}

use rand::Rng;

use super::{Layer, Param, Tensor};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// `U_n h_prev + b_un`, before the reset gate.
    un_h: Vec<f64>,
}

/// Gated recurrent cell run over a `[steps, inputs]` sequence from a zero
/// state, returning the final hidden state.
///
/// Gate rows are stacked `[z; r; n]` in `w` (`[3H, inputs]`), `u`
/// (`[3H, H]`) and `b` (`[3H]`).
///
/// ```text
/// z = σ(W_z x + U_z h + b_z)
/// r = σ(W_r x + U_r h + b_r)
/// n = tanh(W_n x + b_n + r ⊙ (U_n h))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone)]
pub struct Gru {
    pub w: Param,
    pub u: Param,
    pub b: Param,
    cache: Option<(Vec<usize>, Vec<Step>)>,
}

impl Gru {
    pub fn new(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (hidden as f64).sqrt();
        Self::from_parts(
            Tensor::uniform(&[3 * hidden, inputs], s, rng),
            Tensor::uniform(&[3 * hidden, hidden], s, rng),
            Tensor::zeros(&[3 * hidden]),
        )
    }

    pub fn from_parts(w: Tensor, u: Tensor, b: Tensor) -> Self {
        Gru {
            w: Param::new(w),
            u: Param::new(u),
            b: Param::new(b),
            cache: None,
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.value.shape[1]
    }

    pub fn inputs(&self) -> usize {
        self.w.value.shape[1]
    }
}

fn matvec_row(m: &[f64], cols: usize, row: usize, v: &[f64]) -> f64 {
    m[row * cols..(row + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum()
}

impl Layer for Gru {
    fn kind(&self) -> &'static str {
        "GatedRecurrentCell"
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (hn, d) = (self.hidden(), self.inputs());
        let steps = match x.shape.as_slice() {
            [t, dd] if *dd == d => *t,
            [t] if d == 1 => *t,
            _ => {
                return Err(Error::Dimension(format!(
                    "recurrent cell expects [steps, {d}], got {:?}",
                    x.shape
                )))
            }
        };
        let (w, u, b) = (&self.w.value.data, &self.u.value.data, &self.b.value.data);
        let mut h = vec![0.0; hn];
        let mut cache = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = &x.data[t * d..(t + 1) * d];
            let mut z = vec![0.0; hn];
            let mut r = vec![0.0; hn];
            let mut n = vec![0.0; hn];
            let mut un_h = vec![0.0; hn];
            for i in 0..hn {
                z[i] = sigmoid(matvec_row(w, d, i, xt) + matvec_row(u, hn, i, &h) + b[i]);
                r[i] = sigmoid(matvec_row(w, d, hn + i, xt) + matvec_row(u, hn, hn + i, &h) + b[hn + i]);
                un_h[i] = matvec_row(u, hn, 2 * hn + i, &h);
            }
            for i in 0..hn {
                n[i] = (matvec_row(w, d, 2 * hn + i, xt) + b[2 * hn + i] + r[i] * un_h[i]).tanh();
            }
            let next: Vec<f64> = (0..hn).map(|i| (1.0 - z[i]) * n[i] + z[i] * h[i]).collect();
            cache.push(Step {
                x: xt.to_vec(),
                h_prev: std::mem::replace(&mut h, next),
                z,
                r,
                n,
                un_h,
            });
        }
        self.cache = Some((x.shape.clone(), cache));
        Ok(Tensor::vector(h))
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let (shape, steps) = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let (hn, d) = (self.hidden(), self.inputs());
        if dy.len() != hn {
            return Err(Error::Dimension(format!(
                "recurrent upstream has {} values, expected {hn}",
                dy.len()
            )));
        }
        let (w, u) = (&self.w.value.data, &self.u.value.data);
        let (gw, gu, gb) = (&mut self.w.grad.data, &mut self.u.grad.data, &mut self.b.grad.data);
        let mut dx = vec![0.0; steps.len() * d];
        let mut dh = dy.data.clone();
        // Pre-activation gradients for the z, r, n rows, and the U_n h term.
        let mut da = vec![0.0; 3 * hn];
        let mut d_unh = vec![0.0; hn];
        for (t, s) in steps.iter().enumerate().rev() {
            for i in 0..hn {
                let dz = dh[i] * (s.h_prev[i] - s.n[i]);
                let dn = dh[i] * (1.0 - s.z[i]);
                let dan = dn * (1.0 - s.n[i] * s.n[i]);
                let dr = dan * s.un_h[i];
                da[i] = dz * s.z[i] * (1.0 - s.z[i]);
                da[hn + i] = dr * s.r[i] * (1.0 - s.r[i]);
                da[2 * hn + i] = dan;
                d_unh[i] = dan * s.r[i];
            }
            let mut dh_prev: Vec<f64> = (0..hn).map(|i| dh[i] * s.z[i]).collect();
            for row in 0..3 * hn {
                let g = da[row];
                gb[row] += g;
                let g_u = if row >= 2 * hn { d_unh[row - 2 * hn] } else { g };
                for j in 0..d {
                    gw[row * d + j] += g * s.x[j];
                    dx[t * d + j] += w[row * d + j] * g;
                }
                for j in 0..hn {
                    gu[row * hn + j] += g_u * s.h_prev[j];
                    dh_prev[j] += u[row * hn + j] * g_u;
                }
            }
            dh = dh_prev;
        }
        Tensor::new(shape, dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_weights_keep_state_at_zero() {
        let mut g = Gru::from_parts(Tensor::zeros(&[48, 1]), Tensor::zeros(&[48, 16]), Tensor::zeros(&[48]));
        let x = Tensor::new(&[26, 1], (0..26).map(|i| i as f64 * 0.3 - 2.0).collect()).unwrap();
        let h = g.forward(&x).unwrap();
        assert_eq!(h.data, vec![0.0; 16]);
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let mut g = Gru::from_parts(
            Tensor::new(&[3, 1], vec![0.5, -1.0, 2.0]).unwrap(),
            Tensor::zeros(&[3, 1]),
            Tensor::zeros(&[3]),
        );
        let h = g.forward(&Tensor::new(&[1, 1], vec![1.0]).unwrap()).unwrap();
        let z = sigmoid(0.5);
        assert!((h.data[0] - (1.0 - z) * 2f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn wrong_feature_width_is_rejected() {
        let mut r = rng::stream(0, &[]);
        let mut g = Gru::new(2, 4, &mut r);
        assert!(matches!(g.forward(&Tensor::zeros(&[5, 3])), Err(Error::Dimension(_))));
    }
}

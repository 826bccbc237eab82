use rand::Rng;

use super::{glorot_scale, Layer, Param, Tensor};
use crate::error::{Error, Result};

/// 3x3 convolution over `[channels, height, width]` with same padding
/// (`padding = dilation`). Weights are `[out, in, 3, 3]`.
#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub dilation: usize,
    input: Option<Tensor>,
}

impl Conv3x3 {
    pub fn new(inputs: usize, outputs: usize, stride: usize, dilation: usize, rng: &mut impl Rng) -> Self {
        let s = glorot_scale(inputs * 9, outputs * 9);
        Self::from_parts(
            Tensor::uniform(&[outputs, inputs, 3, 3], s, rng),
            Tensor::zeros(&[outputs]),
            stride,
            dilation,
        )
    }

    pub fn from_parts(weight: Tensor, bias: Tensor, stride: usize, dilation: usize) -> Self {
        Conv3x3 {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride: stride.max(1),
            dilation: dilation.max(1),
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape[0]
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    /// Output range whose tap `k` lands inside `0..n`, and the source offset
    /// (`src = o * stride + off`).
    #[inline]
    fn tap_range(&self, k: usize, n: usize, on: usize) -> (usize, usize, isize) {
        let off = (k * self.dilation) as isize - self.dilation as isize;
        let s = self.stride as isize;
        let lo = if off >= 0 { 0 } else { ((-off + s - 1) / s) as usize };
        // Largest o with o * s + off <= n - 1.
        let top = n as isize - 1 - off;
        let hi = if top < 0 { 0 } else { ((top / s) as usize + 1).min(on) };
        (lo, hi.max(lo), off)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        if x.shape.len() != 3 || x.shape[0] != self.in_channels() {
            return Err(Error::Dimension(format!(
                "conv expects [{}, h, w], got {:?}",
                self.in_channels(),
                x.shape
            )));
        }
        Ok((x.shape[1], x.shape[2]))
    }
}

impl Layer for Conv3x3 {
    fn kind(&self) -> &'static str {
        "Conv3x3"
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (h, w) = self.check_input(x)?;
        let (oh, ow) = self.output_size(h, w);
        let (co, ci) = (self.out_channels(), self.in_channels());
        let wt = &self.weight.value.data;
        let mut y = vec![0.0; co * oh * ow];
        for o in 0..co {
            let out = &mut y[o * oh * ow..(o + 1) * oh * ow];
            out.iter_mut().for_each(|v| *v = self.bias.value.data[o]);
            for c in 0..ci {
                let plane = &x.data[c * h * w..(c + 1) * h * w];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let k = wt[((o * ci + c) * 3 + ky) * 3 + kx];
                        if k == 0.0 {
                            continue;
                        }
                        let (ylo, yhi, yoff) = self.tap_range(ky, h, oh);
                        let (xlo, xhi, xoff) = self.tap_range(kx, w, ow);
                        for oy in ylo..yhi {
                            let sy = (oy * self.stride) as isize + yoff;
                            let row = &mut out[oy * ow + xlo..oy * ow + xhi];
                            let base = sy * w as isize + xoff;
                            if self.stride == 1 {
                                let src = &plane[(base + xlo as isize) as usize..(base + xhi as isize) as usize];
                                row.iter_mut().zip(src).for_each(|(o, v)| *o += k * v);
                            } else {
                                for (i, o) in row.iter_mut().enumerate() {
                                    *o += k * plane[(base + ((xlo + i) * self.stride) as isize) as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Tensor::new(&[co, oh, ow], y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let (h, w) = (x.shape[1], x.shape[2]);
        let (oh, ow) = self.output_size(h, w);
        let (co, ci) = (self.out_channels(), self.in_channels());
        dy.expect_shape(&[co, oh, ow], "conv upstream")?;
        let mut dx = vec![0.0; x.len()];
        for o in 0..co {
            let g = &dy.data[o * oh * ow..(o + 1) * oh * ow];
            self.bias.grad.data[o] += g.iter().sum::<f64>();
            for c in 0..ci {
                let plane = &x.data[c * h * w..(c + 1) * h * w];
                let dplane = &mut dx[c * h * w..(c + 1) * h * w];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wi = ((o * ci + c) * 3 + ky) * 3 + kx;
                        let k = self.weight.value.data[wi];
                        let mut gk = 0.0;
                        let (ylo, yhi, yoff) = self.tap_range(ky, h, oh);
                        let (xlo, xhi, xoff) = self.tap_range(kx, w, ow);
                        for oy in ylo..yhi {
                            let sy = (oy * self.stride) as isize + yoff;
                            let grow = &g[oy * ow + xlo..oy * ow + xhi];
                            let base = sy * w as isize + xoff;
                            if self.stride == 1 {
                                let a = (base + xlo as isize) as usize;
                                let b = (base + xhi as isize) as usize;
                                gk += grow.iter().zip(&plane[a..b]).map(|(g, v)| g * v).sum::<f64>();
                                dplane[a..b].iter_mut().zip(grow).for_each(|(d, g)| *d += g * k);
                            } else {
                                for (i, gv) in grow.iter().enumerate() {
                                    let si = (base + ((xlo + i) * self.stride) as isize) as usize;
                                    gk += gv * plane[si];
                                    dplane[si] += gv * k;
                                }
                            }
                        }
                        self.weight.grad.data[wi] += gk;
                    }
                }
            }
        }
        Tensor::new(&x.shape, dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

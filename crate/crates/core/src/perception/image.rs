use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tinynn::Tensor;

/// RGB raster, row-major, channels interleaved, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Image {
            width,
            height,
            data: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = (row * self.width + col) * 3;
        for c in 0..3 {
            self.data[i + c] = rgb[c].clamp(0.0, 1.0);
        }
    }

    pub fn saturation(&self, row: usize, col: usize) -> f64 {
        rgb_to_hsv(self.get(row, col))[1]
    }

    /// Channel-major `[3, height, width]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let n = self.width * self.height;
        let mut out = vec![0.0; 3 * n];
        for p in 0..n {
            for c in 0..3 {
                out[c * n + p] = self.data[p * 3 + c];
            }
        }
        Tensor {
            shape: vec![3, self.height, self.width],
            data: out,
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let [3, h, w] = t.shape[..] else {
            return Err(Error::Dimension(format!("expected [3, h, w], got {:?}", t.shape)));
        };
        let n = h * w;
        let mut data = vec![0.0; 3 * n];
        for p in 0..n {
            for c in 0..3 {
                data[p * 3 + c] = t.data[c * n + p];
            }
        }
        Ok(Image {
            width: w,
            height: h,
            data,
        })
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)
    }

    /// Bilinear resample to a new size.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        let mut out = Image::filled(width, height, [0.0; 3]);
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        for r in 0..height {
            let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let (y0, ty) = (fy.floor() as usize, fy.fract());
            let y1 = (y0 + 1).min(self.height - 1);
            for c in 0..width {
                let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let (x0, tx) = (fx.floor() as usize, fx.fract());
                let x1 = (x0 + 1).min(self.width - 1);
                let (a, b, cc, d) = (self.get(y0, x0), self.get(y0, x1), self.get(y1, x0), self.get(y1, x1));
                let mut px = [0.0; 3];
                for k in 0..3 {
                    px[k] = (a[k] * (1.0 - tx) + b[k] * tx) * (1.0 - ty) + (cc[k] * (1.0 - tx) + d[k] * tx) * ty;
                }
                out.set(r, c, px);
            }
        }
        out
    }
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = h.floor();
    let f = h - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u8 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    let d = max - min;
    let s = if max > 0.0 { d / max } else { 0.0 };
    let h = if d <= 0.0 {
        0.0
    } else if max == rgb[0] {
        ((rgb[1] - rgb[2]) / d).rem_euclid(6.0) / 6.0
    } else if max == rgb[1] {
        ((rgb[2] - rgb[0]) / d + 2.0) / 6.0
    } else {
        ((rgb[0] - rgb[1]) / d + 4.0) / 6.0
    };
    [h, s, max]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip() {
        for &(h, s, v) in &[(0.0, 1.0, 1.0), (0.33, 0.5, 0.8), (0.71, 0.9, 0.4), (0.95, 0.2, 0.6)] {
            let back = rgb_to_hsv(hsv_to_rgb(h, s, v));
            assert!((back[0] - h).abs() < 1e-12 && (back[1] - s).abs() < 1e-12 && (back[2] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ppm_header_and_size() {
        let img = Image::filled(4, 3, [1.0, 0.0, 0.5]);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n4 3\n255\n"));
        assert_eq!(buf.len(), 11 + 4 * 3 * 3);
    }

    #[test]
    fn tensor_round_trip() {
        let mut img = Image::filled(5, 2, [0.1, 0.2, 0.3]);
        img.set(1, 4, [0.9, 0.8, 0.7]);
        assert_eq!(Image::from_tensor(&img.to_tensor()).unwrap(), img);
    }
}

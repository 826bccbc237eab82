use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Example;
use crate::perception::servo_model::hue_jitter;
use crate::perception::Image;
use crate::simworld::primitive::HapticTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub flip_prob: f64,
    pub rotation_deg: f64,
    pub translate_px: f64,
    pub hue_sigma: f64,
    pub time_scale: [f64; 2],
    pub shift_samples: usize,
    pub copies: usize,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            flip_prob: 0.5,
            rotation_deg: 10.0,
            translate_px: 2.0,
            hue_sigma: 0.01,
            time_scale: [0.9, 1.1],
            shift_samples: 2,
            copies: 8,
        }
    }
}

impl AugmentationConfig {
    /// Every transform disabled.
    pub fn identity(copies: usize) -> Self {
        AugmentationConfig {
            flip_prob: 0.0,
            rotation_deg: 0.0,
            translate_px: 0.0,
            hue_sigma: 0.0,
            time_scale: [1.0, 1.0],
            shift_samples: 0,
            copies,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    flip: bool,
    angle: f64,
    shift: [f64; 2],
}

impl Affine {
    fn is_identity(&self) -> bool {
        !self.flip && self.angle == 0.0 && self.shift == [0.0, 0.0]
    }
}

fn bilinear(img: &Image, x: f64, y: f64) -> [f64; 3] {
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let mut out = [0.0; 3];
    let (a, b, c, d) = (img.get(y0, x0), img.get(y0, x1), img.get(y1, x0), img.get(y1, x1));
    for k in 0..3 {
        let top = a[k] + (b[k] - a[k]) * fx;
        let bot = c[k] + (d[k] - c[k]) * fx;
        out[k] = top + (bot - top) * fy;
    }
    out
}

/// Horizontal flip, rotation about the center, then translation; edges
/// are clamped.
fn warp(img: &Image, t: &Affine) -> Image {
    if t.is_identity() {
        return img.clone();
    }
    let mut out = img.clone();
    let cx = (img.width - 1) as f64 / 2.0;
    let cy = (img.height - 1) as f64 / 2.0;
    let (s, c) = t.angle.sin_cos();
    for r in 0..img.height {
        for col in 0..img.width {
            let qx = col as f64 - cx - t.shift[0];
            let qy = r as f64 - cy - t.shift[1];
            let mut px = c * qx + s * qy;
            let py = -s * qx + c * qy;
            if t.flip {
                px = -px;
            }
            out.set(r, col, bilinear(img, px + cx, py + cy));
        }
    }
    out
}

/// Time-scales by `u` and delays by `shift` samples, re-sampling linearly
/// onto the original grid with edge padding.
pub fn warp_trace(trace: &HapticTrace, u: f64, shift: i64) -> HapticTrace {
    let x = &trace.samples;
    let n = x.len();
    let samples = (0..n)
        .map(|i| {
            let src = ((i as f64 - shift as f64) / u).clamp(0.0, (n - 1) as f64);
            let i0 = src.floor() as usize;
            let f = src - i0 as f64;
            if f == 0.0 {
                x[i0]
            } else {
                x[i0] + (x[(i0 + 1).min(n - 1)] - x[i0]) * f
            }
        })
        .collect();
    HapticTrace {
        samples,
        ..trace.clone()
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// `cfg.copies` randomly transformed variants of `ex`. The same geometric
/// transform is applied to both images.
pub fn augment(ex: &Example, cfg: &AugmentationConfig, rng: &mut impl Rng) -> Vec<Example> {
    (0..cfg.copies)
        .map(|_| {
            let t = Affine {
                flip: cfg.flip_prob > 0.0 && rng.gen_bool(cfg.flip_prob.min(1.0)),
                angle: uniform(rng, -cfg.rotation_deg, cfg.rotation_deg).to_radians(),
                shift: [
                    uniform(rng, -cfg.translate_px, cfg.translate_px),
                    uniform(rng, -cfg.translate_px, cfg.translate_px),
                ],
            };
            let dh = if cfg.hue_sigma > 0.0 {
                Normal::new(0.0, cfg.hue_sigma).expect("positive sigma").sample(rng)
            } else {
                0.0
            };
            let u = uniform(rng, cfg.time_scale[0], cfg.time_scale[1]);
            let s = cfg.shift_samples as i64;
            let shift = if s > 0 { rng.gen_range(-s..=s) } else { 0 };
            let tint = |img: Image| if dh == 0.0 { img } else { hue_jitter(&img, dh) };
            Example {
                image: tint(warp(&ex.image, &t)),
                overhead: tint(warp(&ex.overhead, &t)),
                trace: warp_trace(&ex.trace, u, shift),
                ..ex.clone()
            }
        })
        .collect()
}

/// Augments every example and concatenates the copies.
pub fn augment_all(examples: &[Example], cfg: &AugmentationConfig, rng: &mut impl Rng) -> Vec<Example> {
    examples.iter().flat_map(|e| augment(e, cfg, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(v: Vec<f64>) -> HapticTrace {
        HapticTrace {
            samples: v,
            sample_period: 0.001,
            contact_onset_index: 0,
        }
    }

    #[test]
    fn unit_scale_zero_shift_is_identity() {
        let t = trace((0..26).map(|i| (i as f64 * 0.37).sin().abs()).collect());
        assert_eq!(warp_trace(&t, 1.0, 0), t);
    }

    #[test]
    fn shift_delays_with_edge_padding() {
        let t = trace((0..26).map(|i| i as f64).collect());
        let s = warp_trace(&t, 1.0, 2);
        assert_eq!(&s.samples[..4], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.samples[25], 23.0);
    }

    #[test]
    fn stretching_a_ramp_lowers_its_slope() {
        let t = trace((0..26).map(|i| i as f64).collect());
        let s = warp_trace(&t, 1.25, 0);
        assert!((s.samples[10] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn flip_mirrors_columns() {
        let mut img = Image::filled(4, 4, [0.0; 3]);
        img.set(1, 0, [1.0, 0.5, 0.25]);
        let out = warp(
            &img,
            &Affine {
                flip: true,
                angle: 0.0,
                shift: [0.0, 0.0],
            },
        );
        assert_eq!(out.get(1, 3), [1.0, 0.5, 0.25]);
        assert_eq!(out.get(1, 0), [0.0; 3]);
    }
}

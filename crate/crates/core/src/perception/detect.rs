//! Bounding-box detector error model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::render::OverheadImage;
use crate::simworld::PlateState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Ground truth only; never read by policies.
    pub truth: Option<u32>,
}

impl Detection {
    pub fn is_false_positive(&self) -> bool {
        self.truth.is_none()
    }

    pub fn contains(&self, px: [f64; 2]) -> bool {
        (px[0] - self.cx).abs() <= 0.5 * self.w && (px[1] - self.cy).abs() <= 0.5 * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub p_false_negative: f64,
    pub p_false_positive: f64,
    pub jitter_px: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            p_false_negative: 0.05,
            p_false_positive: 0.02,
            jitter_px: 2.0,
        }
    }
}

impl DetectorConfig {
    pub fn perfect() -> Self {
        DetectorConfig {
            p_false_negative: 0.0,
            p_false_positive: 0.0,
            jitter_px: 0.0,
        }
    }
}

/// Keeps a box inside the image by shifting its center.
fn clamp_box(mut d: Detection, size: f64) -> Detection {
    d.w = d.w.clamp(1.0, size);
    d.h = d.h.clamp(1.0, size);
    d.cx = d.cx.clamp(0.5 * d.w - 0.5, size - 0.5 - 0.5 * d.w);
    d.cy = d.cy.clamp(0.5 * d.h - 0.5, size - 0.5 - 0.5 * d.h);
    d
}

/// Hull boxes of the plate's items, degraded by drops, spurious boxes and
/// center jitter.
pub fn detect_items(
    image: &OverheadImage,
    plate: &PlateState,
    cfg: &DetectorConfig,
    rng: &mut impl Rng,
) -> Vec<Detection> {
    let size = image.image.width as f64;
    let jitter = Normal::new(0.0, cfg.jitter_px.max(0.0)).expect("finite jitter");
    let mpp = image.meters_per_pixel;
    let mut out = Vec::new();
    for item in &plate.items {
        let dropped = rng.gen::<f64>() < cfg.p_false_negative;
        let (jx, jy) = (jitter.sample(rng), jitter.sample(rng));
        if dropped {
            continue;
        }
        let c = image.world_to_px(item.center);
        let half = item.aabb_half_extents();
        out.push(clamp_box(
            Detection {
                cx: c[0] + jx,
                cy: c[1] + jy,
                w: 2.0 * half[0] / mpp,
                h: 2.0 * half[1] / mpp,
                truth: Some(item.id),
            },
            size,
        ));
    }
    if rng.gen::<f64>() < cfg.p_false_positive {
        let r = plate.plate_radius * 0.8 * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let c = image.world_to_px([r * a.cos(), r * a.sin()]);
        let w = rng.gen_range(8.0..16.0);
        let h = rng.gen_range(8.0..16.0);
        out.push(clamp_box(
            Detection {
                cx: c[0],
                cy: c[1],
                w,
                h,
                truth: None,
            },
            size,
        ));
    }
    out
}

//! Overhead and wrist-camera rasterization.
//!
//! Pixel coordinates are continuous with integer values at pixel centers;
//! columns follow world x and rows follow world y.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::{hsv_to_rgb, Image};
use crate::simworld::item::dist2;
use crate::simworld::{ForkState, PlateState};

pub const OVERHEAD_SIZE: usize = 128;
/// Overhead field of view half-width (m).
pub const OVERHEAD_HALF_EXTENT: f64 = 0.12;
pub const LOCAL_SIZE: usize = 32;
pub const LOCAL_MPP: f64 = 0.0015;
pub const HUE_NOISE_SIGMA: f64 = 0.02;
/// Brightness of food pixels.
pub const FOOD_VALUE: f64 = 0.85;
pub const BACKGROUND_RGB: [f64; 3] = [0.08, 0.08, 0.08];
pub const PLATE_RGB: [f64; 3] = [0.62, 0.62, 0.62];
pub const FORK_RGB: [f64; 3] = [1.0, 1.0, 1.0];
/// Pixels with at least this saturation are food.
pub const FOOD_SATURATION: f64 = 0.2;
/// Ground-truth target search radius around the tines (px).
pub const ORACLE_RANGE_PX: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadImage {
    pub image: Image,
    pub meters_per_pixel: f64,
}

impl OverheadImage {
    pub fn world_to_px(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] + OVERHEAD_HALF_EXTENT) / self.meters_per_pixel - 0.5,
            (p[1] + OVERHEAD_HALF_EXTENT) / self.meters_per_pixel - 0.5,
        ]
    }

    pub fn px_to_world(&self, px: [f64; 2]) -> [f64; 2] {
        [
            (px[0] + 0.5) * self.meters_per_pixel - OVERHEAD_HALF_EXTENT,
            (px[1] + 0.5) * self.meters_per_pixel - OVERHEAD_HALF_EXTENT,
        ]
    }

    /// Square crop around `center_px`, resampled to `size`.
    pub fn crop(&self, center_px: [f64; 2], half_px: f64, size: usize) -> Image {
        let n = (2.0 * half_px).round().max(1.0) as usize;
        let mut out = Image::filled(n, n, BACKGROUND_RGB);
        let r0 = (center_px[1] - half_px).round() as isize;
        let c0 = (center_px[0] - half_px).round() as isize;
        for r in 0..n {
            for c in 0..n {
                let (sr, sc) = (r0 + r as isize, c0 + c as isize);
                if sr >= 0 && sc >= 0 && (sr as usize) < self.image.height && (sc as usize) < self.image.width {
                    out.set(r, c, self.image.get(sr as usize, sc as usize));
                }
            }
        }
        out.resize(size, size)
    }
}

/// Wrist-camera view with hidden annotations used by the oracle servo and
/// for training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalImage {
    pub image: Image,
    pub camera_center: [f64; 2],
    pub meters_per_pixel: f64,
    /// Tine midpoint.
    pub fork_px: [f64; 2],
    /// Center of the food item nearest the tines, if one lies within
    /// [`ORACLE_RANGE_PX`]. May fall outside the raster.
    pub food_px: Option<[f64; 2]>,
    pub food_id: Option<u32>,
}

/// Subsamples per pixel side for edge coverage.
const SUPERSAMPLE: usize = 4;

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Paints the plate and items with area-weighted edges. `to_world` maps
/// continuous pixel coordinates to the plate frame and must be a
/// translation plus uniform scale by `mpp`.
fn paint_items(
    plate: &PlateState,
    image: &mut Image,
    mpp: f64,
    to_world: impl Fn(f64, f64) -> [f64; 2],
    rng: &mut impl Rng,
) {
    let hue_noise = Normal::new(0.0, HUE_NOISE_SIGMA).expect("positive sigma");
    let n = SUPERSAMPLE;
    let offsets: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64 - 0.5).collect();
    let total = (n * n) as f64;
    let half = 0.5 * mpp;
    let boxes: Vec<[f64; 4]> = plate
        .items
        .iter()
        .map(|it| {
            let h = it.aabb_half_extents();
            [
                it.center[0] - h[0],
                it.center[0] + h[0],
                it.center[1] - h[1],
                it.center[1] + h[1],
            ]
        })
        .collect();
    let mut hits = vec![0usize; plate.items.len()];
    let mut near = Vec::with_capacity(plate.items.len());
    for row in 0..image.height {
        for col in 0..image.width {
            let c = to_world(col as f64, row as f64);
            near.clear();
            near.extend((0..boxes.len()).filter(|&i| {
                let b = boxes[i];
                c[0] + half >= b[0] && c[0] - half <= b[1] && c[1] + half >= b[2] && c[1] - half <= b[3]
            }));
            let d = c[0].hypot(c[1]);
            let rim = (d - plate.plate_radius).abs() <= half * std::f64::consts::SQRT_2;
            let mut on_plate = if d < plate.plate_radius { n * n } else { 0 };
            if rim || !near.is_empty() {
                if rim {
                    on_plate = 0;
                }
                near.iter().for_each(|&i| hits[i] = 0);
                for &oy in &offsets {
                    for &ox in &offsets {
                        let w = to_world(col as f64 + ox, row as f64 + oy);
                        if rim && w[0].hypot(w[1]) <= plate.plate_radius {
                            on_plate += 1;
                        }
                        if let Some(&i) = near.iter().rev().find(|&&i| plate.items[i].contains(w)) {
                            hits[i] += 1;
                        }
                    }
                }
            }
            let base = mix(image.get(row, col), PLATE_RGB, on_plate as f64 / total);
            let best = near.iter().map(|&i| (hits[i], i)).max();
            let rgb = match best {
                Some((h, i)) if h > 0 => {
                    let item = &plate.items[i];
                    let hue = item.appearance.base_hue + hue_noise.sample(rng);
                    let food = hsv_to_rgb(hue, item.appearance.saturation, FOOD_VALUE);
                    mix(base, food, h as f64 / total)
                }
                _ => base,
            };
            image.set(row, col, rgb);
        }
    }
}

/// Draws the plate disk and every item as a filled ellipse with per-pixel
/// hue noise.
pub fn render_overhead(plate: &PlateState, rng: &mut impl Rng) -> OverheadImage {
    let mpp = 2.0 * OVERHEAD_HALF_EXTENT / OVERHEAD_SIZE as f64;
    let mut out = OverheadImage {
        image: Image::filled(OVERHEAD_SIZE, OVERHEAD_SIZE, BACKGROUND_RGB),
        meters_per_pixel: mpp,
    };
    let frame = out.clone();
    paint_items(plate, &mut out.image, mpp, |c, r| frame.px_to_world([c, r]), rng);
    out
}

pub fn local_px(camera_center: [f64; 2], p: [f64; 2]) -> [f64; 2] {
    let half = (LOCAL_SIZE / 2) as f64;
    [
        half + (p[0] - camera_center[0]) / LOCAL_MPP,
        half + (p[1] - camera_center[1]) / LOCAL_MPP,
    ]
}

pub fn in_local_frame(px: [f64; 2]) -> bool {
    let hi = LOCAL_SIZE as f64 - 0.5;
    px.iter().all(|v| *v >= -0.5 && *v < hi)
}

fn draw_chevron(image: &mut Image, tip: [f64; 2]) {
    let (tx, ty) = (tip[0].round() as isize, tip[1].round() as isize);
    for dx in -3isize..=3 {
        for thick in 0..2 {
            let (r, c) = (ty - dx.abs() - thick, tx + dx);
            if r >= 0 && c >= 0 && (r as usize) < image.height && (c as usize) < image.width {
                image.set(r as usize, c as usize, FORK_RGB);
            }
        }
    }
}

/// Eye-in-hand view centered on the camera axis with the tines drawn as a
/// white chevron.
pub fn render_local(plate: &PlateState, fork: &ForkState, rng: &mut impl Rng) -> LocalImage {
    let cam = fork.camera_center();
    let half = (LOCAL_SIZE / 2) as f64;
    let mut image = Image::filled(LOCAL_SIZE, LOCAL_SIZE, BACKGROUND_RGB);
    paint_items(
        plate,
        &mut image,
        LOCAL_MPP,
        |c, r| [cam[0] + (c - half) * LOCAL_MPP, cam[1] + (r - half) * LOCAL_MPP],
        rng,
    );
    let fork_px = local_px(cam, fork.xy());
    draw_chevron(&mut image, fork_px);
    let target = plate
        .items
        .iter()
        .map(|i| (i, local_px(cam, i.center)))
        .map(|(i, px)| (i, px, dist2(px, fork_px)))
        .filter(|t| t.2 <= ORACLE_RANGE_PX * ORACLE_RANGE_PX)
        .min_by(|a, b| a.2.total_cmp(&b.2));
    LocalImage {
        image,
        camera_center: cam,
        meters_per_pixel: LOCAL_MPP,
        fork_px,
        food_px: target.map(|t| t.1),
        food_id: target.map(|t| t.0.id),
    }
}

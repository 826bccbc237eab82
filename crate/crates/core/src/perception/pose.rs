use serde::{Deserialize, Serialize};

use super::detect::Detection;
use super::render::{OverheadImage, FOOD_SATURATION};
use crate::error::{Error, Result};
use crate::simworld::PlateState;

/// Highest keypoint the pose estimator reports above the plate (m).
pub const MAX_KEYPOINT_HEIGHT: f64 = 0.06;
/// Eigenvalue contrast below which a blob counts as circular.
pub const ROUND_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub keypoint: [f64; 3],
    /// Fork roll, perpendicular to the blob's long axis, in `[0, π)`.
    pub roll: f64,
}

/// Coverage-weighted centroid and principal axis of the food blob under
/// the box. Only the connected blob nearest the box center is used, so
/// neighbors clipped by the box do not pull the keypoint.
pub fn estimate_pose(image: &OverheadImage, plate: &PlateState, bx: &Detection) -> Result<PoseEstimate> {
    let img = &image.image;
    let r0 = (bx.cy - 0.5 * bx.h).floor().max(0.0) as usize;
    let r1 = ((bx.cy + 0.5 * bx.h).ceil() as usize).min(img.height - 1);
    let c0 = (bx.cx - 0.5 * bx.w).floor().max(0.0) as usize;
    let c1 = ((bx.cx + 0.5 * bx.w).ceil() as usize).min(img.width - 1);
    let (bh, bw) = (r1 - r0 + 1, c1 - c0 + 1);
    let sat: Vec<f64> = (0..bh * bw).map(|i| img.saturation(r0 + i / bw, c0 + i % bw)).collect();
    let chroma: Vec<f64> = (0..bh * bw)
        .map(|i| {
            let p = img.get(r0 + i / bw, c0 + i % bw);
            p[0].max(p[1]).max(p[2]) - p[0].min(p[1]).min(p[2])
        })
        .collect();
    let seed = (0..bh * bw)
        .filter(|&i| sat[i] >= FOOD_SATURATION)
        .min_by(|&a, &b| {
            let d = |i: usize| ((c0 + i % bw) as f64 - bx.cx).powi(2) + ((r0 + i / bw) as f64 - bx.cy).powi(2);
            d(a).total_cmp(&d(b))
        })
        .ok_or(Error::NoItem)?;

    let mut seen = vec![false; bh * bw];
    let mut stack = vec![seed];
    seen[seed] = true;
    let mut members = Vec::new();
    let nbrs = |i: usize| {
        let (r, c) = (i / bw, i % bw);
        [
            (r > 0).then(|| i - bw),
            (r + 1 < bh).then(|| i + bw),
            (c > 0).then(|| i - 1),
            (c + 1 < bw).then(|| i + 1),
        ]
    };
    while let Some(i) = stack.pop() {
        members.push(i);
        for j in nbrs(i).into_iter().flatten() {
            if !seen[j] && sat[j] >= FOOD_SATURATION {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    // Partially covered rim pixels.
    for k in 0..members.len() {
        for j in nbrs(members[k]).into_iter().flatten() {
            if !seen[j] && chroma[j] > 0.0 {
                seen[j] = true;
                members.push(j);
            }
        }
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &members {
        let (x, y, w) = ((c0 + i % bw) as f64, (r0 + i / bw) as f64, chroma[i]);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        syy += w * y * y;
        sxy += w * x * y;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let cxx = sxx / sw - mx * mx;
    let cyy = syy / sw - my * my;
    let cxy = sxy / sw - mx * my;
    let spread = ((cxx - cyy).powi(2) + 4.0 * cxy * cxy).sqrt();
    let roll = if spread <= ROUND_TOLERANCE * (cxx + cyy) {
        0.0
    } else {
        let axis = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        (axis + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI)
    };
    let world = image.px_to_world([mx, my]);
    let z = plate
        .depth_z(world)
        .clamp(plate.plate_z, plate.plate_z + MAX_KEYPOINT_HEIGHT);
    Ok(PoseEstimate {
        keypoint: [world[0], world[1], z],
        roll,
    })
}

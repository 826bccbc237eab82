use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::render::{render_local, LocalImage};
use super::servo_model::{HeatmapNet, TARGET_LOST_LEVEL};
use crate::error::{Error, Result};
use crate::simworld::{ForkState, PlateState};

pub const SERVO_GAIN: f64 = 0.5;
pub const SERVO_TOLERANCE_PX: f64 = 1.0;
pub const SERVO_MAX_STEPS: usize = 20;

pub enum ServoMode<'a> {
    /// Ground-truth keypoints with Gaussian pixel noise.
    Oracle {
        sigma_px: f64,
    },
    Learned(&'a mut HeatmapNet),
}

/// `(fork_px, food_px)` in the local image.
pub fn servo_offset(local: &LocalImage, mode: &mut ServoMode<'_>, rng: &mut impl Rng) -> Result<([f64; 2], [f64; 2])> {
    match mode {
        ServoMode::Oracle { sigma_px } => {
            let food = local.food_px.ok_or(Error::TargetLost)?;
            if *sigma_px <= 0.0 {
                return Ok((local.fork_px, food));
            }
            let n = Normal::new(0.0, *sigma_px).expect("finite sigma");
            let mut jit = |p: [f64; 2]| [p[0] + n.sample(rng), p[1] + n.sample(rng)];
            Ok((jit(local.fork_px), jit(food)))
        }
        ServoMode::Learned(net) => {
            let maps = net.predict(&local.image)?;
            let (food, level) = maps.food_peak();
            if level < TARGET_LOST_LEVEL {
                return Err(Error::TargetLost);
            }
            Ok((maps.fork_peak().0, food))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoResult {
    pub fork: ForkState,
    /// Last measured food-minus-fork offset (px); `None` if nothing was measured.
    pub offset_px: Option<[f64; 2]>,
    pub steps: usize,
}

/// Render, measure, move by `SERVO_GAIN` of the offset; repeat until the
/// offset is within tolerance or `max_steps` measurements were taken.
pub fn servo_loop(
    plate: &PlateState,
    fork: &ForkState,
    mode: &mut ServoMode<'_>,
    max_steps: usize,
    rng: &mut impl Rng,
) -> Result<ServoResult> {
    let mut fork = *fork;
    let mut offset_px = None;
    let mut steps = 0;
    while steps < max_steps {
        let local = render_local(plate, &fork, rng);
        let (f, t) = servo_offset(&local, mode, rng)?;
        steps += 1;
        let d = [t[0] - f[0], t[1] - f[1]];
        offset_px = Some(d);
        if d[0].hypot(d[1]) <= SERVO_TOLERANCE_PX {
            break;
        }
        fork.position[0] += SERVO_GAIN * d[0] * local.meters_per_pixel;
        fork.position[1] += SERVO_GAIN * d[1] * local.meters_per_pixel;
    }
    Ok(ServoResult { fork, offset_px, steps })
}

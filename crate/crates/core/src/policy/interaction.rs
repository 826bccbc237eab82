//! Approach, servo and probe a single detected item.

use rand::Rng;

use crate::error::{Error, Result};
use crate::perception::detect::Detection;
use crate::perception::servo::SERVO_MAX_STEPS;
use crate::perception::{
    estimate_pose, render_local, servo_loop, Image, OverheadImage, PoseEstimate, ServoMode, ServoResult,
};
use crate::rng::{self, tag, SimRng};
use crate::simworld::primitive::HapticTrace;
use crate::simworld::primitive::{execute_primitive, Action, ExecConfig, Execution};
use crate::simworld::{ForkState, PlateState, APPROACH_HEIGHT};

/// Side of the square images fed to the policy.
pub const POLICY_IMAGE: usize = 32;
/// Half-width of the overhead crop around a detection (overhead px).
pub const CROP_HALF_PX: f64 = 16.0;
/// Servoing happens this far above the estimated item top (m).
pub const SERVO_CLEARANCE: f64 = 0.03;
/// Largest fork displacement in its mount (m).
pub const MAX_MOUNT_OFFSET: f64 = 0.006;

/// Per-purpose noise streams for one attempt.
pub struct Streams {
    pub render: SimRng,
    pub servo: SimRng,
    pub probe: SimRng,
}

impl Streams {
    pub fn new(seed: u64, path: &[u64]) -> Self {
        let s = |t: u64| {
            let mut p = path.to_vec();
            p.push(t);
            rng::stream(seed, &p)
        };
        Streams {
            render: s(tag::RENDER),
            servo: s(tag::SERVO),
            probe: s(tag::PROBE),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Approach {
    pub pose: PoseEstimate,
    pub servo: ServoResult,
    /// Pre-contact overhead crop around the detection.
    pub overhead_crop: Image,
}

#[derive(Debug, Clone)]
pub struct ProbeRecord {
    pub execution: Execution,
    pub trace: HapticTrace,
    /// Wrist-camera frame taken at contact.
    pub image: Image,
}

/// Uniform draw from the disk of mount offsets.
pub fn random_mount_offset(rng: &mut impl Rng) -> [f64; 2] {
    let m = MAX_MOUNT_OFFSET * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    [m * a.cos(), m * a.sin()]
}

/// Pose from the overhead image, then servo above the keypoint.
pub fn approach(
    plate: &PlateState,
    overhead: &OverheadImage,
    det: &Detection,
    mount_offset: [f64; 2],
    servo: &mut ServoMode<'_>,
    streams: &mut Streams,
) -> Result<Approach> {
    let pose = estimate_pose(overhead, plate, det)?;
    let overhead_crop = overhead.crop([det.cx, det.cy], CROP_HALF_PX, POLICY_IMAGE);
    let mut fork = ForkState::at([pose.keypoint[0], pose.keypoint[1], pose.keypoint[2] + SERVO_CLEARANCE]);
    fork.roll = pose.roll;
    fork.mount_offset = mount_offset;
    let servo = servo_loop(plate, &fork, servo, SERVO_MAX_STEPS, &mut streams.servo)?;
    Ok(Approach {
        pose,
        servo,
        overhead_crop,
    })
}

/// Probes straight down at the servoed position and captures the
/// post-contact frame.
pub fn probe(plate: &PlateState, approach: &Approach, cfg: &ExecConfig, streams: &mut Streams) -> Result<ProbeRecord> {
    let fork = &approach.servo.fork;
    // Descend from the servo height; the estimated keypoint can sit below a
    // taller neighbour the fork drifted over.
    let z_hat = approach.pose.keypoint[2].max(fork.position[2] - APPROACH_HEIGHT);
    let action = Action::probe(fork.position[0], fork.position[1], z_hat, approach.pose.roll);
    let execution = execute_primitive(plate, fork, &action, cfg, &mut streams.probe)?;
    let trace = execution.trace.clone().ok_or(Error::NoItem)?;
    let image = render_local(plate, &execution.fork, &mut streams.render).image;
    Ok(ProbeRecord {
        execution,
        trace,
        image,
    })
}

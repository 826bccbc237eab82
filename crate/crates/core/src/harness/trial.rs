//! One closed-loop acquisition attempt.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::detect::Detection;
use crate::perception::{DetectorConfig, HeatmapNet, OverheadImage, ServoMode};
use crate::policy::interaction::{approach, probe, Approach, Streams, MAX_MOUNT_OFFSET};
use crate::policy::{infer_primitive, label_for, PolicyMode, PolicyModel};
use crate::rng::{self, tag};
use crate::simworld::primitive::{execute_primitive, Action, ExecConfig};
use crate::simworld::{
    resolve_outcome, FailureMode, OutcomeModel, PlateState, Primitive, TrialOutcome, APPROACH_HEIGHT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ServoSetting {
    /// Ground-truth keypoints with Gaussian pixel noise.
    Oracle { sigma_px: f64 },
    /// Heatmap model supplied to the experiment.
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub max_retries: usize,
    pub servo: ServoSetting,
    pub detector: DetectorConfig,
    pub exec: ExecConfig,
    pub outcome: OutcomeModel,
    /// Per-attempt standard deviation of the fork's drift in its mount (m).
    pub mount_walk_sigma: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            max_retries: 3,
            servo: ServoSetting::Oracle { sigma_px: 1.0 },
            detector: DetectorConfig::default(),
            exec: ExecConfig::default(),
            outcome: OutcomeModel::default(),
            mount_walk_sigma: 0.0005,
            seed: 0,
        }
    }
}

impl TrialConfig {
    /// Every noise source off: perfect detector, exact servo, noiseless
    /// force sensing, no slip, fixed mount.
    pub fn noise_free(seed: u64) -> Self {
        TrialConfig {
            servo: ServoSetting::Oracle { sigma_px: 0.0 },
            detector: DetectorConfig::perfect(),
            exec: ExecConfig::noiseless(),
            outcome: OutcomeModel { baseline_slip: 0.0 },
            mount_walk_sigma: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the primitive is chosen.
pub enum Policy<'a> {
    Learned(&'a mut PolicyModel),
    /// Reads the hidden compliance class of the targeted item.
    Oracle,
    /// Always the same primitive (for stubs and paired comparisons).
    Fixed(Primitive),
}

impl Policy<'_> {
    pub fn name(&self) -> String {
        match self {
            Policy::Learned(m) => m.mode.name().to_string(),
            Policy::Oracle => "oracle".into(),
            Policy::Fixed(p) => format!("fixed_{p:?}").to_lowercase(),
        }
    }

    fn probes(&self) -> bool {
        match self {
            Policy::Learned(m) => m.mode.probes(),
            // Probes like the learned policies so only the choice differs.
            Policy::Oracle | Policy::Fixed(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptReport {
    pub outcome: TrialOutcome,
    pub primitive: Option<Primitive>,
    /// Item the detection pointed at, if any.
    pub target: Option<u32>,
    /// Item under the tines when the skewer ended.
    pub contact_item: Option<u32>,
}

impl AttemptReport {
    fn detection_miss(target: Option<u32>) -> Self {
        AttemptReport {
            outcome: TrialOutcome::failure(FailureMode::DetectionMiss),
            primitive: None,
            target,
            contact_item: None,
        }
    }
}

/// Heatmap model for [`ServoSetting::Learned`]; ignored otherwise.
pub type ServoNet<'a> = Option<&'a mut HeatmapNet>;

/// Pose → servo → probe → infer → skewer → scoop → outcome, for the item
/// under `det`. Noise streams are derived from `(cfg.seed, path)`.
#[allow(clippy::too_many_arguments)]
pub fn run_acquisition_attempt(
    plate: &PlateState,
    overhead: &OverheadImage,
    det: &Detection,
    policy: &mut Policy<'_>,
    cfg: &TrialConfig,
    mount_offset: [f64; 2],
    servo_net: ServoNet<'_>,
    path: &[u64],
) -> Result<AttemptReport> {
    let mut streams = Streams::new(cfg.seed, path);
    let mut servo = match (cfg.servo, servo_net) {
        (ServoSetting::Oracle { sigma_px }, _) => ServoMode::Oracle { sigma_px },
        (ServoSetting::Learned, Some(net)) => ServoMode::Learned(net),
        (ServoSetting::Learned, None) => return Err(Error::Config("learned servo needs a heatmap model".into())),
    };
    let app: Approach = match approach(plate, overhead, det, mount_offset, &mut servo, &mut streams) {
        Ok(a) => a,
        Err(Error::NoItem | Error::TargetLost) => return Ok(AttemptReport::detection_miss(det.truth)),
        Err(e) => return Err(e),
    };
    let record = if policy.probes() {
        Some(probe(plate, &app, &cfg.exec, &mut streams)?)
    } else {
        None
    };
    let primitive = match policy {
        Policy::Learned(model) => {
            let image = if model.mode == PolicyMode::OpenLoop {
                &app.overhead_crop
            } else {
                &record.as_ref().expect("probed").image
            };
            infer_primitive(model, Some(image), record.as_ref().map(|r| &r.trace))?.0
        }
        Policy::Oracle => {
            let fork = app.servo.fork.xy();
            let item = plate
                .item_at(fork)
                .or_else(|| det.truth.and_then(|id| plate.item(id)))
                .or_else(|| plate.nearest_item(fork));
            match item {
                Some(i) => label_for(i.compliance()),
                None => return Ok(AttemptReport::detection_miss(det.truth)),
            }
        }
        Policy::Fixed(p) => *p,
    };

    let fork = app.servo.fork;
    let sensed = record.as_ref().map_or(f64::MIN, |r| r.execution.fork.position[2]);
    let top = app.pose.keypoint[2].max(sensed) + APPROACH_HEIGHT;
    let action = Action::skewer(primitive, fork.position[0], fork.position[1], top, app.pose.roll);
    let mut skewer_rng = rng::stream(cfg.seed, &[path, &[tag::SKEWER]].concat());
    let skewer = execute_primitive(plate, &fork, &action, &cfg.exec, &mut skewer_rng)?;
    let scoop = Action::scoop(
        skewer.fork.position[0],
        skewer.fork.position[1],
        skewer.fork.position[2],
        app.pose.roll,
    );
    execute_primitive(plate, &skewer.fork, &scoop, &cfg.exec, &mut skewer_rng)?;

    let outcome = match skewer.contact_item.and_then(|id| plate.item(id)) {
        Some(item) => {
            let mut r = rng::stream(cfg.seed, &[path, &[tag::OUTCOME]].concat());
            resolve_outcome(
                item,
                primitive,
                skewer.insertion_depth,
                skewer.peak_item_load,
                skewer.final_offset,
                &cfg.outcome,
                &mut r,
            )
        }
        None => TrialOutcome {
            peak_force: skewer.peak_force,
            ..TrialOutcome::failure(FailureMode::Miss)
        },
    };
    Ok(AttemptReport {
        outcome,
        primitive: Some(primitive),
        target: det.truth,
        contact_item: skewer.contact_item,
    })
}

/// One step of the mount-offset random walk, kept inside the mount.
pub fn walk_mount(offset: [f64; 2], sigma: f64, rng: &mut impl Rng) -> [f64; 2] {
    if sigma <= 0.0 {
        return offset;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    let mut next = [offset[0] + n.sample(rng), offset[1] + n.sample(rng)];
    let r = next[0].hypot(next[1]);
    if r > MAX_MOUNT_OFFSET {
        next = [next[0] * MAX_MOUNT_OFFSET / r, next[1] * MAX_MOUNT_OFFSET / r];
    }
    next
}

//! Fork primitives on a fixed-rate control loop.
//!
//! Skewers advance one control step at a time. Inside a step the fork moves
//! along a straight line, so fracture and force-limit events are located by
//! bisection on that segment rather than by sub-stepping.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::item::{FoodItem, ForkState, PlateState};
use super::material::{tilt_lift, tilt_relief, POST_FRACTURE_FRACTION};
use super::outcome::tines_for_offset;
use super::{
    ANGLED_SPEED, ANGLED_TILT, APPROACH_HEIGHT, CONTACT_THRESHOLD, DT, FORCE_LIMIT, FORCE_NOISE_SIGMA, PROBE_SPEED,
    SCOOP_PITCH, SCOOP_RATE, SENSOR_PERIOD, TRACE_LEN, VERTICAL_SPEED, Z_TOLERANCE,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    Probe,
    VerticalSkewer,
    AngledSkewer,
    Scoop,
}

impl Primitive {
    pub fn is_skewer(self) -> bool {
        matches!(self, Primitive::VerticalSkewer | Primitive::AngledSkewer)
    }
}

/// `(x, y, z, dz, gamma, dbeta)` plus the primitive it instantiates.
/// For skewers `dz` is the per-control-step descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub dz: f64,
    pub gamma: f64,
    pub dbeta: f64,
    pub primitive: Primitive,
}

impl Action {
    /// Probe from `APPROACH_HEIGHT` above the estimated top `z_hat`.
    pub fn probe(x: f64, y: f64, z_hat: f64, gamma: f64) -> Self {
        Action {
            x,
            y,
            z: z_hat + APPROACH_HEIGHT,
            dz: -APPROACH_HEIGHT,
            gamma,
            dbeta: 0.0,
            primitive: Primitive::Probe,
        }
    }

    pub fn vertical_skewer(x: f64, y: f64, z: f64, gamma: f64) -> Self {
        Action {
            x,
            y,
            z,
            dz: -DT * VERTICAL_SPEED,
            gamma,
            dbeta: 0.0,
            primitive: Primitive::VerticalSkewer,
        }
    }

    pub fn angled_skewer(x: f64, y: f64, z: f64, gamma: f64) -> Self {
        Action {
            x,
            y,
            z,
            dz: -DT * ANGLED_SPEED,
            gamma,
            dbeta: ANGLED_TILT,
            primitive: Primitive::AngledSkewer,
        }
    }

    pub fn skewer(primitive: Primitive, x: f64, y: f64, z: f64, gamma: f64) -> Self {
        match primitive {
            Primitive::AngledSkewer => Self::angled_skewer(x, y, z, gamma),
            _ => Self::vertical_skewer(x, y, z, gamma),
        }
    }

    pub fn scoop(x: f64, y: f64, z: f64, gamma: f64) -> Self {
        Action {
            x,
            y,
            z,
            dz: 0.0,
            gamma,
            dbeta: SCOOP_PITCH,
            primitive: Primitive::Scoop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidAction(m.to_string()));
        if ![self.x, self.y, self.z, self.dz, self.gamma, self.dbeta]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite field");
        }
        if self.dbeta < 0.0 {
            return bad("dbeta must be >= 0");
        }
        match self.primitive {
            Primitive::Probe if self.dbeta != 0.0 => bad("probe must not tilt"),
            Primitive::VerticalSkewer | Primitive::AngledSkewer if self.dz >= 0.0 => bad("skewers must move downward"),
            _ => Ok(()),
        }
    }
}

/// Force-magnitude window recorded at probe contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapticTrace {
    pub samples: Vec<f64>,
    pub sample_period: f64,
    /// Sensor sample, counted from the start of the probe descent, at which
    /// contact was detected. The window starts there.
    pub contact_onset_index: usize,
}

impl HapticTrace {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != TRACE_LEN {
            return Err(Error::Dimension(format!(
                "trace has {} samples, expected {TRACE_LEN}",
                self.samples.len()
            )));
        }
        if !self.samples.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::Dimension("trace samples must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub beta: f64,
    pub gamma: f64,
    pub force: f64,
}

/// Writes one JSON object per control step.
pub fn write_trajectory_jsonl<W: Write>(points: &[TrajectoryPoint], mut out: W) -> Result<()> {
    for p in points {
        let line = serde_json::to_string(p).map_err(|e| Error::json("trajectory", e))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<trajectory>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    PlateHeight,
    ForceLimit,
    ContactRecorded,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub force_noise_sigma: f64,
    pub contact_threshold: f64,
    pub force_limit: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            force_noise_sigma: FORCE_NOISE_SIGMA,
            contact_threshold: CONTACT_THRESHOLD,
            force_limit: FORCE_LIMIT,
        }
    }
}

impl ExecConfig {
    pub fn noiseless() -> Self {
        ExecConfig {
            force_noise_sigma: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub trajectory: Vec<TrajectoryPoint>,
    pub trace: Option<HapticTrace>,
    pub fork: ForkState,
    pub stop: StopReason,
    /// Peak force at the sensor (N).
    pub peak_force: f64,
    /// Peak load carried by the item itself, excluding the plate (N).
    pub peak_item_load: f64,
    pub insertion_depth: f64,
    pub fractured: bool,
    pub contact_item: Option<u32>,
    /// Horizontal distance from the tines to the contacted item's center.
    pub final_offset: f64,
}

/// Contact geometry under a fixed fork `(x, y)`.
struct Column<'a> {
    item: Option<&'a FoodItem>,
    local_stiffness: f64,
    plate_z: f64,
    plate_stiffness: f64,
}

impl<'a> Column<'a> {
    fn new(plate: &'a PlateState, xy: [f64; 2]) -> Self {
        let item = plate.item_at(xy);
        Column {
            item,
            local_stiffness: item.map_or(0.0, |i| i.local_stiffness(xy)),
            plate_z: plate.plate_z,
            plate_stiffness: plate.plate_stiffness,
        }
    }

    fn top(&self) -> f64 {
        self.plate_z + self.item.map_or(0.0, |i| i.height)
    }

    /// Load driving fracture: elastic item load, relieved by tilt in
    /// compliant material.
    fn item_load(&self, z: f64, beta: f64) -> f64 {
        match self.item {
            None => 0.0,
            Some(item) => {
                let p = (self.top() - z).clamp(0.0, item.height);
                self.local_stiffness * p * tilt_relief(beta, self.local_stiffness)
            }
        }
    }

    /// Force at the sensor.
    fn measured(&self, z: f64, beta: f64, fractured: bool) -> f64 {
        let plate = self.plate_stiffness * (self.plate_z - z).max(0.0);
        match self.item {
            None => plate,
            Some(item) => {
                if self.top() - z <= 0.0 {
                    return 0.0;
                }
                let carried = if fractured {
                    POST_FRACTURE_FRACTION * item.material.fracture_force
                } else {
                    self.item_load(z, beta)
                };
                carried * tilt_lift(beta, self.local_stiffness) + plate
            }
        }
    }

    fn fracture_force(&self) -> f64 {
        self.item.map_or(f64::INFINITY, |i| i.material.fracture_force)
    }
}

/// First parameter in `(0, 1]` where `f` reaches `threshold`, assuming `f`
/// starts below it and is monotone over the segment.
fn first_crossing(f: impl Fn(f64) -> f64, threshold: f64) -> Option<f64> {
    if f(1.0) < threshold {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Runs one primitive from the action's start pose.
pub fn execute_primitive(
    plate: &PlateState,
    fork: &ForkState,
    action: &Action,
    cfg: &ExecConfig,
    rng: &mut impl Rng,
) -> Result<Execution> {
    action.validate()?;
    let xy = [action.x, action.y];
    let floor = plate.plate_z - Z_TOLERANCE;
    if action.z < floor {
        return Err(Error::InvalidStart(format!(
            "start z {:.4} is below the plate",
            action.z
        )));
    }
    let mut start = *fork;
    start.position = [action.x, action.y, action.z];
    start.roll = action.gamma;
    match action.primitive {
        Primitive::Probe => {
            if action.z < plate.surface_z(xy) {
                return Err(Error::InvalidStart(format!(
                    "probe starts inside an item at z {:.4}",
                    action.z
                )));
            }
            start.pitch = 0.0;
            Ok(run_probe(plate, start, cfg, rng))
        }
        Primitive::VerticalSkewer | Primitive::AngledSkewer => {
            start.pitch = 0.0;
            Ok(run_skewer(plate, start, action, cfg))
        }
        Primitive::Scoop => Ok(run_scoop(plate, start, action)),
    }
}

fn point(t: f64, fork: &ForkState, force: f64) -> TrajectoryPoint {
    TrajectoryPoint {
        t,
        x: fork.position[0],
        y: fork.position[1],
        z: fork.position[2],
        beta: fork.pitch,
        gamma: fork.roll,
        force,
    }
}

fn finish(
    plate: &PlateState,
    mut fork: ForkState,
    trajectory: Vec<TrajectoryPoint>,
    trace: Option<HapticTrace>,
    stop: StopReason,
    peaks: (f64, f64),
    fractured: bool,
) -> Execution {
    let column = Column::new(plate, fork.xy());
    let insertion_depth = column
        .item
        .map_or(0.0, |i| (column.top() - fork.position[2]).clamp(0.0, i.height));
    let final_offset = column
        .item
        .map_or(f64::INFINITY, |i| super::item::dist2(fork.xy(), i.center).sqrt());
    fork.tine_engagement_depth = insertion_depth;
    fork.tines_inserted = match column.item {
        Some(i) if insertion_depth > 0.0 => tines_for_offset(final_offset, i.minor_axis),
        _ => 0,
    };
    Execution {
        trajectory,
        trace,
        fork,
        stop,
        peak_force: peaks.0,
        peak_item_load: peaks.1,
        insertion_depth,
        fractured,
        contact_item: column.item.map(|i| i.id),
        final_offset,
    }
}

fn run_probe(plate: &PlateState, mut fork: ForkState, cfg: &ExecConfig, rng: &mut impl Rng) -> Execution {
    let column = Column::new(plate, fork.xy());
    let floor = plate.plate_z - Z_TOLERANCE;
    let step = PROBE_SPEED * SENSOR_PERIOD;
    let per_control = (DT / SENSOR_PERIOD).round() as usize;
    let force_at = |z: f64| column.measured(z, 0.0, false);
    let mut trajectory = vec![point(0.0, &fork, force_at(fork.position[2]))];
    let mut z = fork.position[2];
    let mut peak = (0.0f64, 0.0f64);
    let mut tick = 0usize;
    let max_ticks = ((z - floor) / step).ceil() as usize + 1;

    // Descend until the contact threshold is crossed or the fork bottoms out.
    loop {
        let f = force_at(z);
        if f >= cfg.contact_threshold || tick >= max_ticks {
            break;
        }
        z = (z - step).max(floor);
        tick += 1;
        if tick % per_control == 0 {
            fork.position[2] = z;
            trajectory.push(point(tick as f64 * SENSOR_PERIOD, &fork, force_at(z)));
        }
    }
    let onset = tick;
    let noise = Normal::new(0.0, cfg.force_noise_sigma.max(0.0)).expect("finite sigma");
    let mut samples = Vec::with_capacity(TRACE_LEN);
    for i in 0..TRACE_LEN {
        if i > 0 && force_at(z) < cfg.force_limit {
            z = (z - step).max(floor);
            tick += 1;
        }
        let f = force_at(z);
        peak.0 = peak.0.max(f);
        peak.1 = peak.1.max(column.item_load(z, 0.0));
        let n = if cfg.force_noise_sigma > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        };
        samples.push((f + n).max(0.0));
    }
    fork.position[2] = z;
    trajectory.push(point(tick as f64 * SENSOR_PERIOD, &fork, force_at(z)));
    let trace = HapticTrace {
        samples,
        sample_period: SENSOR_PERIOD,
        contact_onset_index: onset,
    };
    finish(
        plate,
        fork,
        trajectory,
        Some(trace),
        StopReason::ContactRecorded,
        peak,
        false,
    )
}

fn run_skewer(plate: &PlateState, mut fork: ForkState, action: &Action, cfg: &ExecConfig) -> Execution {
    let column = Column::new(plate, fork.xy());
    let speed = -action.dz / DT;
    let z_start = fork.position[2];
    let stroke = z_start - plate.plate_z;
    let beta_at = |z: f64| {
        if stroke <= 0.0 {
            action.dbeta
        } else {
            action.dbeta * ((z_start - z) / stroke).clamp(0.0, 1.0)
        }
    };
    let fracture_force = column.fracture_force();
    let mut fractured = false;
    let mut z = z_start;
    let mut t = 0.0;
    let start_force = column.measured(z, 0.0, false);
    let mut peak = (start_force, column.item_load(z, 0.0));
    let mut trajectory = vec![point(0.0, &fork, start_force)];
    let sample_step = speed * SENSOR_PERIOD;

    let stop = loop {
        if z <= plate.plate_z {
            break StopReason::PlateHeight;
        }
        if column.measured(z, beta_at(z), fractured) >= cfg.force_limit {
            break StopReason::ForceLimit;
        }
        let z_end = (z - speed * DT).max(plate.plate_z);
        let mut seg_start = z;
        let mut limited = false;
        // A step can hold at most one fracture, so two passes suffice.
        for _ in 0..2 {
            let span = seg_start - z_end;
            let at = |s: f64| seg_start - s * span;
            let t_limit = first_crossing(|s| column.measured(at(s), beta_at(at(s)), fractured), cfg.force_limit);
            let t_frac = if fractured {
                None
            } else {
                first_crossing(|s| column.item_load(at(s), beta_at(at(s))), fracture_force.next_up())
            };
            match (t_limit, t_frac) {
                (Some(l), f) if f.map_or(true, |f| l <= f) => {
                    let zl = at(l);
                    peak.0 = peak.0.max(column.measured(zl, beta_at(zl), fractured));
                    peak.1 = peak.1.max(column.item_load(zl, beta_at(zl)));
                    seg_start = zl;
                    limited = true;
                    break;
                }
                (_, Some(f)) => {
                    let zf = at(f);
                    // The sample that registers the fracture still sees the
                    // pre-fracture load one sensor period later.
                    let zs = zf - sample_step;
                    peak.0 = peak.0.max(column.measured(zs, beta_at(zs), false));
                    peak.1 = peak.1.max(column.item_load(zs, beta_at(zs)));
                    fractured = true;
                    seg_start = zf;
                }
                _ => {
                    let f = column.measured(z_end, beta_at(z_end), fractured);
                    peak.0 = peak.0.max(f);
                    peak.1 = peak.1.max(column.item_load(z_end, beta_at(z_end)));
                    seg_start = z_end;
                    break;
                }
            }
        }
        let travelled = z - seg_start;
        t += if speed > 0.0 { travelled / speed } else { DT };
        z = seg_start;
        fork.position[2] = z;
        fork.pitch = beta_at(z);
        trajectory.push(point(t, &fork, column.measured(z, fork.pitch, fractured)));
        if limited {
            break StopReason::ForceLimit;
        }
    };
    finish(plate, fork, trajectory, None, stop, peak, fractured)
}

fn run_scoop(plate: &PlateState, mut fork: ForkState, action: &Action) -> Execution {
    let mut trajectory = vec![point(0.0, &fork, 0.0)];
    let target = action.dbeta.max(fork.pitch);
    let mut t = 0.0;
    while fork.pitch < target {
        fork.pitch = (fork.pitch + SCOOP_RATE * DT).min(target);
        t += DT;
        trajectory.push(point(t, &fork, 0.0));
    }
    finish(plate, fork, trajectory, None, StopReason::Completed, (0.0, 0.0), false)
}

#[cfg(test)]
mod tests {
    use super::super::item::{Appearance, FoodItem};
    use super::super::material::{ComplianceClass, MaterialProfile, Subregion};
    use super::*;
    use crate::rng;

    fn plate_with(stiffness: f64, fracture: f64, height: f64, class: ComplianceClass) -> PlateState {
        let mut plate = PlateState::empty(0.12, 6000.0);
        plate.items.push(FoodItem {
            id: 0,
            center: [0.0, 0.0],
            height,
            major_axis: 0.024,
            minor_axis: 0.02,
            axis_angle: 0.0,
            material: MaterialProfile {
                stiffness,
                fracture_force: fracture,
                compliance_class: class,
                pierce_depth: (fracture / stiffness).min(0.9 * height),
                subregions: vec![Subregion::uniform()],
            },
            appearance: Appearance {
                base_hue: 0.1,
                saturation: 0.8,
                shape_eccentricity: 0.2,
            },
            archetype: "test".into(),
            nominal_height: height,
        });
        plate
    }

    fn probe(plate: &PlateState, x: f64) -> Execution {
        let a = Action::probe(x, 0.0, plate.depth_z([x, 0.0]), 0.0);
        let mut r = rng::stream(0, &[1]);
        execute_primitive(
            plate,
            &ForkState::at([x, 0.0, 0.05]),
            &a,
            &ExecConfig::noiseless(),
            &mut r,
        )
        .unwrap()
    }

    #[test]
    fn probe_trace_is_a_ramp_of_slope_kv() {
        let plate = plate_with(1000.0, 60.0, 0.015, ComplianceClass::Hard);
        let ex = probe(&plate, 0.0);
        let trace = ex.trace.unwrap();
        trace.validate().unwrap();
        assert_eq!(trace.sample_period, 0.001);
        // k * v = 20 N/s = 0.020 N per sample.
        for (i, s) in trace.samples.iter().enumerate() {
            assert!(
                (s - trace.samples[0] - 0.020 * i as f64).abs() < 1e-9,
                "sample {i}: {s}"
            );
        }
        assert!(trace.samples[0] >= 0.1 - 1e-9 && trace.samples[0] < 0.1 + 0.02 + 1e-9);
    }

    #[test]
    fn probe_inside_item_is_invalid() {
        let plate = plate_with(1000.0, 60.0, 0.015, ComplianceClass::Hard);
        let a = Action {
            z: 0.01,
            ..Action::probe(0.0, 0.0, 0.0, 0.0)
        };
        let mut r = rng::stream(0, &[1]);
        let res = execute_primitive(&plate, &ForkState::at([0.0; 3]), &a, &ExecConfig::default(), &mut r);
        assert!(matches!(res, Err(Error::InvalidStart(_))));
    }

    #[test]
    fn vertical_over_bare_plate_stops_at_plate() {
        let plate = plate_with(1000.0, 60.0, 0.015, ComplianceClass::Hard);
        let a = Action::vertical_skewer(0.08, 0.0, 0.02, 0.0);
        let mut r = rng::stream(0, &[1]);
        let ex = execute_primitive(
            &plate,
            &ForkState::at([0.08, 0.0, 0.02]),
            &a,
            &ExecConfig::default(),
            &mut r,
        )
        .unwrap();
        assert_eq!(ex.stop, StopReason::PlateHeight);
        assert_eq!(ex.insertion_depth, 0.0);
        assert!((ex.fork.position[2] - plate.plate_z).abs() < 1e-12);
    }

    #[test]
    fn skewer_must_descend() {
        let mut a = Action::vertical_skewer(0.0, 0.0, 0.02, 0.0);
        a.dz = 0.01;
        assert!(a.validate().is_err());
        let mut p = Action::probe(0.0, 0.0, 0.0, 0.0);
        p.dbeta = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn angled_on_hard_hits_force_limit_before_pierce() {
        let plate = plate_with(3000.0, 20.0, 0.014, ComplianceClass::Hard);
        let pierce = plate.items[0].material.pierce_depth;
        let pr = probe(&plate, 0.0);
        let z0 = pr.fork.position[2];
        let a = Action::angled_skewer(0.0, 0.0, z0, 0.0);
        let mut r = rng::stream(0, &[1]);
        let ex = execute_primitive(&plate, &pr.fork, &a, &ExecConfig::default(), &mut r).unwrap();
        assert_eq!(ex.stop, StopReason::ForceLimit);
        assert!(ex.insertion_depth < pierce);
        assert!((ex.peak_force - FORCE_LIMIT).abs() < 1e-6);
    }

    #[test]
    fn vertical_on_hard_pierces_to_plate() {
        let plate = plate_with(3000.0, 20.0, 0.014, ComplianceClass::Hard);
        let pr = probe(&plate, 0.0);
        let a = Action::vertical_skewer(0.0, 0.0, pr.fork.position[2], 0.0);
        let mut r = rng::stream(0, &[1]);
        let ex = execute_primitive(&plate, &pr.fork, &a, &ExecConfig::default(), &mut r).unwrap();
        assert_eq!(ex.stop, StopReason::PlateHeight);
        assert!(ex.fractured);
        assert!(ex.insertion_depth >= plate.items[0].material.pierce_depth);
        assert_eq!(ex.fork.tines_inserted, 4);
    }

    #[test]
    fn scoop_reaches_eighty_degrees() {
        let plate = plate_with(3000.0, 20.0, 0.014, ComplianceClass::Hard);
        let a = Action::scoop(0.0, 0.0, 0.0, 0.0);
        let mut r = rng::stream(0, &[1]);
        let ex = execute_primitive(&plate, &ForkState::at([0.0; 3]), &a, &ExecConfig::default(), &mut r).unwrap();
        assert!((ex.fork.pitch - SCOOP_PITCH).abs() < 1e-12);
        assert!(ex.fork.pitch <= std::f64::consts::FRAC_PI_2);
    }
}

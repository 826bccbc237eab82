//! Plate, food items, fork primitives and outcome resolution.

pub mod archetype;
pub mod item;
pub mod material;
pub mod outcome;
pub mod primitive;

pub use archetype::{spawn_plate, Archetype, ArchetypeTable, Confounder, PlateSpec};
pub use item::{contact_force, remove_item, FoodItem, ForkState, PlateState};
pub use material::{ComplianceClass, MaterialProfile, Subregion};
pub use outcome::{resolve_outcome, FailureMode, OutcomeModel, TrialOutcome};
pub use primitive::{
    execute_primitive, Action, ExecConfig, Execution, HapticTrace, Primitive, StopReason, TrajectoryPoint,
};

/// Control period (s).
pub const DT: f64 = 0.05;
/// Force sensor period (s).
pub const SENSOR_PERIOD: f64 = 0.001;
/// Samples in a haptic trace.
pub const TRACE_LEN: usize = 26;
/// Probe start height above the estimated item top (m).
pub const APPROACH_HEIGHT: f64 = 0.01;
/// Force that counts as contact (N).
pub const CONTACT_THRESHOLD: f64 = 0.1;
/// Skewers stop when the sensed force reaches this (N).
pub const FORCE_LIMIT: f64 = 25.0;
/// Probe descent speed (m/s).
pub const PROBE_SPEED: f64 = 0.02;
pub const VERTICAL_SPEED: f64 = 0.17;
pub const ANGLED_SPEED: f64 = 0.08;
/// Final pitch of the angled skewer (rad).
pub const ANGLED_TILT: f64 = 65.0 * std::f64::consts::PI / 180.0;
pub const SCOOP_PITCH: f64 = 80.0 * std::f64::consts::PI / 180.0;
/// Scoop pitch rate (rad/s).
pub const SCOOP_RATE: f64 = 90.0 * std::f64::consts::PI / 180.0;
pub const FORCE_NOISE_SIGMA: f64 = 0.05;
/// How far below the plate surface the fork may be commanded (m).
pub const Z_TOLERANCE: f64 = 0.002;

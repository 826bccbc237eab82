//! Desk-scale simulator and learning stack for probe-then-skewer bite
//! acquisition.
//!
//! The crate is split the way a trial flows through it:
//!
//! * [`simworld`] owns plates, food items, the contact-force material model
//!   and the fork primitives (probe, vertical/angled skewer, scoop).
//! * [`perception`] renders overhead and eye-in-hand images, runs the
//!   detection error model, pose estimation and the servo loop.
//! * [`tinynn`] is a small hand-written differentiable kernel (dense,
//!   3x3 conv, gated recurrent cell, losses, Adam, gradient checking).
//! * [`policy`] builds datasets from probe interactions and trains the
//!   visuo-haptic primitive classifier and its single-modality baselines.
//! * [`harness`] runs closed-loop acquisition attempts, plate-clearing
//!   experiments, method comparisons and the command-line interface.

pub mod error;
pub mod harness;
pub mod perception;
pub mod policy;
pub mod rng;
pub mod simworld;
pub mod tinynn;

pub use error::{Error, Result};

/// Crate version recorded in run manifests and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

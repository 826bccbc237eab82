//! Rendering, detection error model, pose estimation and visual servoing.

pub mod detect;
pub mod image;
pub mod pose;
pub mod render;
pub mod servo;
pub mod servo_model;

pub use detect::{detect_items, Detection, DetectorConfig};
pub use image::Image;
pub use pose::{estimate_pose, PoseEstimate};
pub use render::{render_local, render_overhead, LocalImage, OverheadImage};
pub use servo::{servo_loop, servo_offset, ServoMode, ServoResult};
pub use servo_model::{train_servo_model, HeatmapNet, HeatmapPair, ServoExample, ServoTrainConfig};

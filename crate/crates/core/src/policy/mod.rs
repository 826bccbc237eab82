//! Probe datasets, augmentation and the visuo-haptic primitive classifier.

pub mod augment;
pub mod dataset;
pub mod interaction;
pub mod model;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::Image;
use crate::simworld::primitive::HapticTrace;
use crate::simworld::{ComplianceClass, Confounder, Primitive};

pub use augment::{augment, AugmentationConfig};
pub use dataset::{generate_dataset, Dataset, DatasetConfig};
pub use model::PolicyModel;
pub use train::{
    evaluate_confusion, export_embeddings, infer_primitive, sample_efficiency_sweep, train_policy, ConfusionMatrix,
    SweepRow, TrainConfig, TrainedPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Multimodal,
    VisionOnly,
    HapticOnly,
    /// Overhead crop only, no probe.
    OpenLoop,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 4] = [
        PolicyMode::Multimodal,
        PolicyMode::VisionOnly,
        PolicyMode::HapticOnly,
        PolicyMode::OpenLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::Multimodal => "multimodal",
            PolicyMode::VisionOnly => "vision_only",
            PolicyMode::HapticOnly => "haptic_only",
            PolicyMode::OpenLoop => "open_loop",
        }
    }

    pub fn uses_image(self) -> bool {
        self != PolicyMode::HapticOnly
    }

    pub fn uses_trace(self) -> bool {
        matches!(self, PolicyMode::Multimodal | PolicyMode::HapticOnly)
    }

    /// Whether the attempt needs a probe before inference.
    pub fn probes(self) -> bool {
        self != PolicyMode::OpenLoop
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy mode `{s}`")))
    }
}

/// Class index used by the classifier head.
pub fn label_index(p: Primitive) -> usize {
    match p {
        Primitive::VerticalSkewer => 0,
        _ => 1,
    }
}

pub fn index_label(i: usize) -> Primitive {
    if i == 0 {
        Primitive::VerticalSkewer
    } else {
        Primitive::AngledSkewer
    }
}

/// Hard items are skewered vertically, soft ones at an angle.
pub fn label_for(class: ComplianceClass) -> Primitive {
    match class {
        ComplianceClass::Hard => Primitive::VerticalSkewer,
        ComplianceClass::Soft => Primitive::AngledSkewer,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Post-contact wrist-camera frame.
    pub image: Image,
    /// Pre-contact overhead crop, used by the open-loop baseline.
    pub overhead: Image,
    pub trace: HapticTrace,
    pub label: Primitive,
    pub archetype: String,
    pub tags: Vec<Confounder>,
}

impl Example {
    pub fn has_tag(&self, t: Confounder) -> bool {
        self.tags.contains(&t)
    }

    /// The image this mode looks at.
    pub fn image_for(&self, mode: PolicyMode) -> &Image {
        if mode == PolicyMode::OpenLoop {
            &self.overhead
        } else {
            &self.image
        }
    }
}

//! Visual encoder, haptic encoder and fused classifier head.
//!
//! ```text
//! image [3,32,32] → conv s2 → relu → conv s2 → relu → dense 512→32 → relu ─┐
//!                                                                           ├→ [48] → dense → logits [2]
//! trace [26] / 2  → gated recurrent cell (hidden 16) ──────────────────────┘
//! ```
//!
//! A branch the mode does not use contributes zeros to the fused embedding.

use rand::Rng;

use super::PolicyMode;
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::simworld::TRACE_LEN;
use crate::tinynn::loss::{cross_entropy, softmax};
use crate::tinynn::{Checkpoint, Conv3x3, Dense, Gru, Layer, Module, Param, Relu, Tensor};

pub const CHANNELS: usize = 8;
pub const VISUAL_DIM: usize = 32;
pub const HAPTIC_DIM: usize = 16;
pub const EMBED_DIM: usize = VISUAL_DIM + HAPTIC_DIM;
pub const TRACE_SCALE: f64 = 0.5;
/// Input side length.
pub const IMAGE_SIZE: usize = 32;
const FLAT: usize = CHANNELS * (IMAGE_SIZE / 4) * (IMAGE_SIZE / 4);

#[derive(Clone)]
pub struct PolicyModel {
    pub mode: PolicyMode,
    conv1: Conv3x3,
    relu1: Relu,
    conv2: Conv3x3,
    relu2: Relu,
    dense_v: Dense,
    relu_v: Relu,
    gru: Gru,
    head: Dense,
    /// Branches that ran in the last forward pass.
    active: (bool, bool),
}

/// Logits and the fused embedding of one forward pass.
pub struct Forward {
    pub logits: Vec<f64>,
    pub embedding: Vec<f64>,
}

impl PolicyModel {
    pub fn new(mode: PolicyMode, rng: &mut impl Rng) -> Self {
        PolicyModel {
            mode,
            conv1: Conv3x3::new(3, CHANNELS, 2, 1, rng),
            relu1: Relu::default(),
            conv2: Conv3x3::new(CHANNELS, CHANNELS, 2, 1, rng),
            relu2: Relu::default(),
            dense_v: Dense::new(FLAT, VISUAL_DIM, rng),
            relu_v: Relu::default(),
            gru: Gru::new(1, HAPTIC_DIM, rng),
            head: Dense::new(EMBED_DIM, 2, rng),
            active: (false, false),
        }
    }

    pub fn seeded(mode: PolicyMode, seed: u64) -> Self {
        Self::new(mode, &mut rng::stream(seed, &[tag::INIT]))
    }

    pub fn layer_kinds(&self) -> Vec<String> {
        ["Conv3x3", "Conv3x3", "Dense", "Gru", "Dense"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn visual(&mut self, image: &Tensor) -> Result<Vec<f64>> {
        image.expect_shape(&[3, IMAGE_SIZE, IMAGE_SIZE], "policy image")?;
        let h = self.relu1.forward(&self.conv1.forward(image)?)?;
        let h = self.relu2.forward(&self.conv2.forward(&h)?)?;
        let flat = Tensor::vector(h.data);
        Ok(self.relu_v.forward(&self.dense_v.forward(&flat)?)?.data)
    }

    fn haptic(&mut self, trace: &[f64]) -> Result<Vec<f64>> {
        if trace.len() != TRACE_LEN {
            return Err(Error::Dimension(format!(
                "trace has {} samples, expected {TRACE_LEN}",
                trace.len()
            )));
        }
        let x = Tensor::new(&[TRACE_LEN, 1], trace.iter().map(|v| v * TRACE_SCALE).collect())?;
        Ok(self.gru.forward(&x)?.data)
    }

    /// Runs the branches this mode uses. Inputs for unused branches are
    /// ignored; missing required inputs are an error.
    pub fn forward(&mut self, image: Option<&Tensor>, trace: Option<&[f64]>) -> Result<Forward> {
        let mut embedding = vec![0.0; EMBED_DIM];
        let use_v = self.mode.uses_image();
        let use_h = self.mode.uses_trace();
        if use_v {
            let v = self.visual(image.ok_or(Error::MissingModality("image"))?)?;
            embedding[..VISUAL_DIM].copy_from_slice(&v);
        }
        if use_h {
            let h = self.haptic(trace.ok_or(Error::MissingModality("trace"))?)?;
            embedding[VISUAL_DIM..].copy_from_slice(&h);
        }
        self.active = (use_v, use_h);
        let logits = self.head.forward(&Tensor::vector(embedding.clone()))?.data;
        Ok(Forward { logits, embedding })
    }

    pub fn backward(&mut self, dlogits: &[f64]) -> Result<()> {
        let de = self.head.backward(&Tensor::vector(dlogits.to_vec()))?.data;
        let (use_v, use_h) = self.active;
        if use_v {
            let g = self.relu_v.backward(&Tensor::vector(de[..VISUAL_DIM].to_vec()))?;
            let g = self.dense_v.backward(&g)?;
            let s = IMAGE_SIZE / 4;
            let g = self.relu2.backward(&Tensor::new(&[CHANNELS, s, s], g.data)?)?;
            let g = self.conv2.backward(&g)?;
            let g = self.relu1.backward(&g)?;
            self.conv1.backward(&g)?;
        }
        if use_h {
            self.gru.backward(&Tensor::vector(de[VISUAL_DIM..].to_vec()))?;
        }
        Ok(())
    }

    /// Cross-entropy against `label`; accumulates gradients when `backward`.
    pub fn loss(&mut self, image: Option<&Tensor>, trace: Option<&[f64]>, label: usize, backward: bool) -> Result<f64> {
        let f = self.forward(image, trace)?;
        let (l, g) = cross_entropy(&f.logits, label);
        if backward {
            self.backward(&g)?;
        }
        Ok(l)
    }

    pub fn probabilities(&mut self, image: Option<&Tensor>, trace: Option<&[f64]>) -> Result<[f64; 2]> {
        let p = softmax(&self.forward(image, trace)?.logits);
        Ok([p[0], p[1]])
    }

    pub fn checkpoint(&self, seed: u64, config: serde_json::Value) -> Checkpoint {
        let config = serde_json::json!({ "mode": self.mode, "train": config });
        Checkpoint::capture(self, self.layer_kinds(), seed, config)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mode: PolicyMode = serde_json::from_value(ck.config["mode"].clone())
            .map_err(|e| Error::Checkpoint(format!("policy mode: {e}")))?;
        let mut m = PolicyModel::seeded(mode, ck.seed);
        ck.restore(&mut m)?;
        Ok(m)
    }
}

impl Module for PolicyModel {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.conv1.params();
        v.extend(self.conv2.params());
        v.extend(self.dense_v.params());
        v.extend(self.gru.params());
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv1.params_mut();
        v.extend(self.conv2.params_mut());
        v.extend(self.dense_v.params_mut());
        v.extend(self.gru.params_mut());
        v.extend(self.head.params_mut());
        v
    }

    fn relu_pattern(&self) -> Vec<bool> {
        if !self.active.0 {
            return Vec::new();
        }
        let mut v = self.relu1.relu_pattern();
        v.extend(self.relu2.relu_pattern());
        v.extend(self.relu_v.relu_pattern());
        v
    }
}

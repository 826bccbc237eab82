//! Fully convolutional fork/food keypoint heatmaps for the wrist camera.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::{hsv_to_rgb, rgb_to_hsv, Image};
use super::render::{in_local_frame, render_local, FOOD_SATURATION};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::simworld::{spawn_plate, ArchetypeTable, ForkState, PlateSpec};
use crate::tinynn::loss::bce_with_logits;
use crate::tinynn::{batch, Adam, Checkpoint, Conv3x3, Layer, Module, Param, Relu, Tensor};

pub const HEATMAP_SIGMA: f64 = 1.5;
/// Food peaks below this mean nothing is in frame.
pub const TARGET_LOST_LEVEL: f64 = 0.2;
const CHANNELS: usize = 8;
const DILATIONS: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapPair {
    pub size: usize,
    pub fork: Vec<f64>,
    pub food: Vec<f64>,
}

fn argmax(map: &[f64], size: usize) -> ([f64; 2], f64) {
    let (i, v) = map.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, &v)| if v > best.1 { (i, v) } else { best },
    );
    ([(i % size) as f64, (i / size) as f64], v)
}

impl HeatmapPair {
    pub fn fork_peak(&self) -> ([f64; 2], f64) {
        argmax(&self.fork, self.size)
    }

    pub fn food_peak(&self) -> ([f64; 2], f64) {
        argmax(&self.food, self.size)
    }
}

/// Isotropic Gaussian bump with unit peak at `center`.
pub fn gaussian_map(size: usize, center: Option<[f64; 2]>) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    if let Some(c) = center {
        for r in 0..size {
            for col in 0..size {
                let d2 = (col as f64 - c[0]).powi(2) + (r as f64 - c[1]).powi(2);
                out[r * size + col] = (-d2 / (2.0 * HEATMAP_SIGMA * HEATMAP_SIGMA)).exp();
            }
        }
    }
    out
}

/// Stride-1 3x3 convolutions with dilations 1, 2, 4, 8 and ReLU between
/// them; two output channels (fork, food) read through a sigmoid.
#[derive(Clone)]
pub struct HeatmapNet {
    convs: Vec<Conv3x3>,
    relus: Vec<Relu>,
}

impl HeatmapNet {
    pub fn new(rng: &mut impl Rng) -> Self {
        let widths = [3, CHANNELS, CHANNELS, CHANNELS, 2];
        HeatmapNet {
            convs: DILATIONS
                .iter()
                .enumerate()
                .map(|(i, &d)| Conv3x3::new(widths[i], widths[i + 1], 1, d, rng))
                .collect(),
            relus: vec![Relu::default(); DILATIONS.len() - 1],
        }
    }

    pub fn layer_kinds(&self) -> Vec<String> {
        self.convs.iter().map(|c| c.kind().to_string()).collect()
    }

    /// Logits `[2, h, w]`.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for i in 0..self.convs.len() {
            h = self.convs[i].forward(&h)?;
            if i < self.relus.len() {
                h = self.relus[i].forward(&h)?;
            }
        }
        Ok(h)
    }

    pub fn backward(&mut self, dlogits: &Tensor) -> Result<Tensor> {
        let mut g = dlogits.clone();
        for i in (0..self.convs.len()).rev() {
            if i < self.relus.len() {
                g = self.relus[i].backward(&g)?;
            }
            g = self.convs[i].backward(&g)?;
        }
        Ok(g)
    }

    pub fn predict(&mut self, image: &Image) -> Result<HeatmapPair> {
        let logits = self.forward(&image.to_tensor())?;
        let n = image.width * image.height;
        let p: Vec<f64> = logits
            .data
            .iter()
            .map(|v| crate::tinynn::activation::sigmoid(*v))
            .collect();
        Ok(HeatmapPair {
            size: image.width,
            fork: p[..n].to_vec(),
            food: p[n..].to_vec(),
        })
    }

    /// Mean per-pixel BCE over both channels; accumulates gradients when
    /// `backward` is set.
    pub fn loss(&mut self, ex: &ServoExample, backward: bool) -> Result<f64> {
        let logits = self.forward(&ex.image.to_tensor())?;
        let size = ex.image.width;
        let mut target = gaussian_map(size, Some(ex.fork_px));
        target.extend(gaussian_map(size, ex.food_px));
        let (l, g) = bce_with_logits(&logits.data, &target);
        if backward {
            self.backward(&Tensor::new(&logits.shape, g)?)?;
        }
        Ok(l)
    }

    pub fn checkpoint(&self, seed: u64, config: &ServoTrainConfig) -> Checkpoint {
        Checkpoint::capture(
            self,
            self.layer_kinds(),
            seed,
            serde_json::to_value(config).unwrap_or_default(),
        )
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut net = HeatmapNet::new(&mut rng::stream(ck.seed, &[tag::INIT]));
        ck.restore(&mut net)?;
        Ok(net)
    }
}

impl Module for HeatmapNet {
    fn params(&self) -> Vec<&Param> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }

    fn relu_pattern(&self) -> Vec<bool> {
        self.relus.iter().flat_map(|r| r.relu_pattern()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoExample {
    pub image: Image,
    pub fork_px: [f64; 2],
    pub food_px: Option<[f64; 2]>,
    /// Index of the base render this example derives from.
    pub base: usize,
}

impl ServoExample {
    /// Uniform-noise image with fixed keypoints, for gradient checks.
    pub fn random(size: usize, rng: &mut impl Rng) -> Self {
        let mut image = Image::filled(size, size, [0.0; 3]);
        for v in image.data.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let s = size as f64;
        ServoExample {
            image,
            fork_px: [0.45 * s, 0.5 * s],
            food_px: Some([0.2 * s, 0.72 * s]),
            base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoTrainConfig {
    pub base_renders: usize,
    pub augmented_total: usize,
    pub holdout_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Largest fork-to-item offset in base renders (m).
    pub max_offset: f64,
}

impl Default for ServoTrainConfig {
    fn default() -> Self {
        ServoTrainConfig {
            base_renders: 200,
            augmented_total: 3500,
            holdout_fraction: 0.1,
            epochs: 8,
            batch_size: 16,
            lr: 3e-3,
            max_offset: 0.018,
        }
    }
}

fn flip(ex: &ServoExample, horizontal: bool) -> ServoExample {
    let n = ex.image.width;
    let mut img = ex.image.clone();
    for r in 0..n {
        for c in 0..n {
            let (sr, sc) = if horizontal { (r, n - 1 - c) } else { (n - 1 - r, c) };
            img.set(r, c, ex.image.get(sr, sc));
        }
    }
    let m = |p: [f64; 2]| {
        if horizontal {
            [(n - 1) as f64 - p[0], p[1]]
        } else {
            [p[0], (n - 1) as f64 - p[1]]
        }
    };
    ServoExample {
        image: img,
        fork_px: m(ex.fork_px),
        food_px: ex.food_px.map(m),
        base: ex.base,
    }
}

fn shift(ex: &ServoExample, dx: isize, dy: isize) -> ServoExample {
    let n = ex.image.width as isize;
    let mut img = ex.image.clone();
    for r in 0..n {
        for c in 0..n {
            let sr = (r - dy).clamp(0, n - 1) as usize;
            let sc = (c - dx).clamp(0, n - 1) as usize;
            img.set(r as usize, c as usize, ex.image.get(sr, sc));
        }
    }
    let m = |p: [f64; 2]| [p[0] + dx as f64, p[1] + dy as f64];
    ServoExample {
        image: img,
        fork_px: m(ex.fork_px),
        food_px: ex.food_px.map(m).filter(|p| in_local_frame(*p)),
        base: ex.base,
    }
}

/// Rotates the hue of food pixels.
pub fn hue_jitter(image: &Image, dh: f64) -> Image {
    let mut out = image.clone();
    for r in 0..image.height {
        for c in 0..image.width {
            let [h, s, v] = rgb_to_hsv(image.get(r, c));
            if s >= FOOD_SATURATION {
                out.set(r, c, hsv_to_rgb(h + dh, s, v));
            }
        }
    }
    out
}

fn augment(ex: &ServoExample, rng: &mut impl Rng) -> ServoExample {
    let mut out = ex.clone();
    if rng.gen_bool(0.5) {
        out = flip(&out, true);
    }
    if rng.gen_bool(0.5) {
        out = flip(&out, false);
    }
    out = shift(&out, rng.gen_range(-3..=3), rng.gen_range(-3..=3));
    out.image = hue_jitter(&out.image, rng.gen_range(-0.03..0.03));
    out
}

/// Wrist-camera renders of seen archetypes with the fork placed near a
/// randomly chosen item, padded out to `augmented_total` by augmentation.
pub fn build_servo_dataset(table: &ArchetypeTable, cfg: &ServoTrainConfig, seed: u64) -> Result<Vec<ServoExample>> {
    let seen: Vec<&str> = table.seen().into_iter().map(|(n, _)| n).collect();
    if seen.is_empty() {
        return Err(Error::Config("no seen archetypes".into()));
    }
    let mut base = Vec::with_capacity(cfg.base_renders);
    for b in 0..cfg.base_renders {
        let mut r = rng::stream(seed, &[tag::DATASET, 1, b as u64]);
        let picks: Vec<(&str, usize)> = (0..4).map(|_| (*seen.choose(&mut r).expect("non-empty"), 1)).collect();
        let plate = spawn_plate(&PlateSpec::new("servo", &picks), table, r.gen())?;
        let target = plate.items.choose(&mut r).expect("four items");
        let rad = cfg.max_offset * r.gen::<f64>().sqrt();
        let ang = r.gen_range(0.0..std::f64::consts::TAU);
        let mut fork = ForkState::at([
            target.center[0] + rad * ang.cos(),
            target.center[1] + rad * ang.sin(),
            0.05,
        ]);
        let m = 0.006 * r.gen::<f64>().sqrt();
        let ma = r.gen_range(0.0..std::f64::consts::TAU);
        fork.mount_offset = [m * ma.cos(), m * ma.sin()];
        let local = render_local(&plate, &fork, &mut r);
        base.push(ServoExample {
            image: local.image,
            fork_px: local.fork_px,
            food_px: local.food_px.filter(|p| in_local_frame(*p)),
            base: b,
        });
    }
    let mut r = rng::stream(seed, &[tag::AUGMENT, 1]);
    let mut out = base.clone();
    while out.len() < cfg.augmented_total && !base.is_empty() {
        let src = &base[out.len() % base.len()];
        out.push(augment(src, &mut r));
    }
    Ok(out)
}

/// Held-out split by base render, so augmented copies never straddle it.
pub fn split_holdout(data: &[ServoExample], cfg: &ServoTrainConfig) -> (Vec<ServoExample>, Vec<ServoExample>) {
    let cut = ((1.0 - cfg.holdout_fraction) * cfg.base_renders as f64).round() as usize;
    data.iter().cloned().partition(|e| e.base < cut)
}

/// Mean keypoint distance (px) of argmax decoding, over both channels.
pub fn keypoint_error(net: &mut HeatmapNet, data: &[ServoExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in data {
        let maps = net.predict(&ex.image)?;
        let (f, _) = maps.fork_peak();
        total += ((f[0] - ex.fork_px[0]).powi(2) + (f[1] - ex.fork_px[1]).powi(2)).sqrt();
        count += 1;
        if let Some(t) = ex.food_px {
            let (p, _) = maps.food_peak();
            total += ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt();
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

pub fn mean_loss(net: &mut HeatmapNet, data: &[ServoExample]) -> Result<f64> {
    let mut s = 0.0;
    for ex in data {
        s += net.loss(ex, false)?;
    }
    Ok(s / data.len().max(1) as f64)
}

pub struct ServoTraining {
    pub model: HeatmapNet,
    pub final_loss: f64,
}

pub fn train_servo_model(train: &[ServoExample], cfg: &ServoTrainConfig, seed: u64) -> Result<ServoTraining> {
    if train.is_empty() {
        return Err(Error::Config("servo dataset is empty".into()));
    }
    let mut model = HeatmapNet::new(&mut rng::stream(seed, &[tag::INIT]));
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut r = rng::stream(seed, &[tag::TRAIN]);
    let mut final_loss = mean_loss(&mut model, &train[..train.len().min(64)])?;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&ServoExample> = chunk.iter().map(|&i| &train[i]).collect();
            epoch_loss += batch::accumulate(&mut model, &batch, |m, ex| m.loss(ex, true))?;
            model.scale_grad(1.0 / batch.len() as f64);
            opt.update(model.params_mut())?;
        }
        final_loss = epoch_loss / train.len() as f64;
    }
    Ok(ServoTraining { model, final_loss })
}

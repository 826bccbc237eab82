use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::augment::{augment_all, AugmentationConfig};
use super::model::{PolicyModel, EMBED_DIM};
use super::{label_index, Example, PolicyMode};
use crate::error::{Error, Result};
use crate::perception::Image;
use crate::rng::{self, tag};
use crate::simworld::primitive::HapticTrace;
use crate::simworld::Primitive;
use crate::tinynn::{batch, Adam, Module, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub augmentation: AugmentationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            augmentation: AugmentationConfig::default(),
        }
    }
}

pub struct TrainedPolicy {
    pub model: PolicyModel,
    /// Mean training loss per epoch.
    pub curve: Vec<f64>,
    pub seed: u64,
    pub config: TrainConfig,
}

impl TrainedPolicy {
    pub fn checkpoint(&self) -> crate::tinynn::Checkpoint {
        self.model
            .checkpoint(self.seed, serde_json::to_value(self.config).unwrap_or_default())
    }
}

struct Prepared {
    image: Tensor,
    trace: Vec<f64>,
    label: usize,
}

fn prepare(ex: &Example, mode: PolicyMode) -> Prepared {
    Prepared {
        image: ex.image_for(mode).to_tensor(),
        trace: ex.trace.samples.clone(),
        label: label_index(ex.label),
    }
}

/// Augments `train` and fits a fresh model with Adam on softmax
/// cross-entropy.
pub fn train_policy(train: &[Example], mode: PolicyMode, cfg: &TrainConfig, seed: u64) -> Result<TrainedPolicy> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if cfg.augmentation.copies == 0 {
        return Err(Error::Config("augmentation copies must be positive".into()));
    }
    let augmented = augment_all(train, &cfg.augmentation, &mut rng::stream(seed, &[tag::AUGMENT]));
    let data: Vec<Prepared> = augmented.iter().map(|e| prepare(e, mode)).collect();
    let mut model = PolicyModel::seeded(mode, seed);
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut r = rng::stream(seed, &[tag::TRAIN]);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &data[i]).collect();
            total += batch::accumulate(&mut model, &batch, |m, p| {
                m.loss(Some(&p.image), Some(&p.trace), p.label, true)
            })?;
            model.scale_grad(1.0 / batch.len() as f64);
            opt.update(model.params_mut())?;
        }
        curve.push(total / data.len() as f64);
    }
    Ok(TrainedPolicy {
        model,
        curve,
        seed,
        config: *cfg,
    })
}

/// Most likely primitive and the softmax vector. Ties go to the angled
/// skewer.
pub fn infer_primitive(
    model: &mut PolicyModel,
    image: Option<&Image>,
    trace: Option<&HapticTrace>,
) -> Result<(Primitive, [f64; 2])> {
    let t = image.map(Image::to_tensor);
    let p = model.probabilities(t.as_ref(), trace.map(|t| t.samples.as_slice()))?;
    let choice = if p[0] > p[1] {
        Primitive::VerticalSkewer
    } else {
        Primitive::AngledSkewer
    };
    Ok((choice, p))
}

/// Prediction for a stored example, using the inputs its mode needs.
pub fn predict_example(model: &mut PolicyModel, ex: &Example) -> Result<(Primitive, [f64; 2])> {
    let mode = model.mode;
    infer_primitive(model, Some(ex.image_for(mode)), Some(&ex.trace))
}

/// Rows are the true label, columns the prediction (vertical, angled).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Primitive, Primitive)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (truth, pred) in pairs {
            m.counts[label_index(truth)][label_index(pred)] += 1;
        }
        m
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct = self.counts[0][0] + self.counts[1][1];
        correct as f64 / self.total().max(1) as f64
    }

    /// Row-wise recall for class index `i` (0 vertical, 1 angled).
    pub fn class_accuracy(&self, i: usize) -> f64 {
        let row = self.counts[i][0] + self.counts[i][1];
        self.counts[i][i] as f64 / row.max(1) as f64
    }
}

pub fn evaluate_confusion(model: &mut PolicyModel, test: &[Example]) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let mut pairs = Vec::with_capacity(test.len());
    for ex in test {
        pairs.push((ex.label, predict_example(model, ex)?.0));
    }
    Ok(ConfusionMatrix::from_pairs(pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub embedding: Vec<f64>,
    pub label: Primitive,
    pub archetype: String,
}

/// Fused 48-d embedding of every example.
pub fn export_embeddings(model: &mut PolicyModel, examples: &[Example]) -> Result<Vec<EmbeddingRow>> {
    if model.mode != PolicyMode::Multimodal {
        return Err(Error::Mode(format!(
            "embeddings need a multimodal model, got {}",
            model.mode
        )));
    }
    examples
        .iter()
        .map(|ex| {
            let f = model.forward(Some(&ex.image.to_tensor()), Some(&ex.trace.samples))?;
            Ok(EmbeddingRow {
                embedding: f.embedding,
                label: ex.label,
                archetype: ex.archetype.clone(),
            })
        })
        .collect()
}

pub fn write_embeddings_csv(rows: &[EmbeddingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..EMBED_DIM).map(|i| format!("e{i}")).collect();
    header.push("label".into());
    header.push("archetype".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.embedding.iter().map(|v| v.to_string()).collect();
        rec.push(format!("{:?}", r.label));
        rec.push(r.archetype.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub overall_acc: f64,
    pub vertical_acc: f64,
    pub angled_acc: f64,
}

pub const DEFAULT_FRACTIONS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 1.00];

/// Seeded subset of `ceil(fraction * n)` examples, kept in original order.
pub fn subsample(base: &[Example], fraction: f64, seed: u64) -> Result<Vec<Example>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} must be in (0, 1]")));
    }
    let n = ((fraction * base.len() as f64).ceil() as usize).clamp(1, base.len().max(1));
    let mut idx: Vec<usize> = (0..base.len()).collect();
    idx.shuffle(&mut rng::stream(seed, &[tag::SWEEP, fraction.to_bits()]));
    let mut keep = idx[..n.min(base.len())].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| base[i].clone()).collect())
}

/// One multimodal training run per `(fraction, seed)`, scored on `test`.
pub fn sample_efficiency_sweep(
    base: &[Example],
    test: &[Example],
    fractions: &[f64],
    seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(fractions.len() * seeds.len());
    for &fraction in fractions {
        for &seed in seeds {
            let sub = subsample(base, fraction, seed)?;
            let mut trained = train_policy(&sub, PolicyMode::Multimodal, cfg, seed)?;
            let cm = evaluate_confusion(&mut trained.model, test)?;
            rows.push(SweepRow {
                fraction,
                seed,
                overall_acc: cm.accuracy(),
                vertical_acc: cm.class_accuracy(0),
                angled_acc: cm.class_accuracy(1),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Predicted label name used in reports.
pub fn primitive_name(p: Primitive) -> &'static str {
    match label_index(p) {
        0 => "vertical",
        _ => "angled",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_angled_on_balanced_set() {
        let pairs = (0..60).map(|i| {
            let truth = if i % 2 == 0 {
                Primitive::VerticalSkewer
            } else {
                Primitive::AngledSkewer
            };
            (truth, Primitive::AngledSkewer)
        });
        let m = ConfusionMatrix::from_pairs(pairs);
        assert_eq!(m.total(), 60);
        assert_eq!(m.accuracy(), 0.5);
        assert_eq!(m.class_accuracy(0), 0.0);
        assert_eq!(m.class_accuracy(1), 1.0);
    }

    #[test]
    fn perfect_classifier_is_diagonal() {
        let m = ConfusionMatrix::from_pairs([
            (Primitive::VerticalSkewer, Primitive::VerticalSkewer),
            (Primitive::AngledSkewer, Primitive::AngledSkewer),
        ]);
        assert_eq!(m.counts, [[1, 0], [0, 1]]);
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn bad_fraction_is_config_error() {
        assert!(matches!(subsample(&[], 0.0, 1), Err(Error::Config(_))));
        assert!(matches!(subsample(&[], 1.5, 1), Err(Error::Config(_))));
    }
}

//! Single-item probe datasets.
//!
//! Examples alternate Hard and Soft archetypes; within a class, archetypes
//! that belong to a misleading pair come first. The first `n_test` examples
//! form the test split, so it is exactly class-balanced and both halves of
//! every pair appear equally often in it.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::interaction::{approach, probe, random_mount_offset, Streams};
use super::{label_for, Example};
use crate::error::{Error, Result};
use crate::perception::{detect_items, render_overhead, DetectorConfig, ServoMode};
use crate::rng::{self, tag};
use crate::simworld::primitive::ExecConfig;
use crate::simworld::{spawn_plate, ArchetypeTable, ComplianceClass, Confounder, PlateSpec};

/// Re-draws allowed when a scene cannot be probed (e.g. servo target lost).
const MAX_REDRAWS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_base: usize,
    pub n_test: usize,
    /// Oracle servo keypoint noise (px).
    pub servo_sigma_px: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_base: 300,
            n_test: 60,
            servo_sigma_px: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

/// Seen archetype names per class, misleading-pair members first.
fn class_orders(table: &ArchetypeTable) -> Result<[Vec<String>; 2]> {
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    for (name, a) in table.seen() {
        let key = (!a.tags.contains(&Confounder::MisleadingPair), name.to_string());
        match a.compliance {
            ComplianceClass::Hard => hard.push(key),
            ComplianceClass::Soft => soft.push(key),
        }
    }
    if hard.is_empty() || soft.is_empty() {
        return Err(Error::Config(
            "seen archetypes must include both Hard and Soft items".into(),
        ));
    }
    hard.sort();
    soft.sort();
    let names = |v: Vec<(bool, String)>| v.into_iter().map(|k| k.1).collect();
    Ok([names(hard), names(soft)])
}

/// Archetype for example `i`.
pub fn archetype_for(orders: &[Vec<String>; 2], i: usize) -> &str {
    let class = &orders[i % 2];
    &class[(i / 2) % class.len()]
}

fn probe_example(table: &ArchetypeTable, name: &str, cfg: &DatasetConfig, seed: u64, i: usize) -> Result<Example> {
    let arch = table.get(name)?;
    let mut last = Error::TargetLost;
    for redraw in 0..MAX_REDRAWS {
        let path = [tag::DATASET, i as u64, redraw];
        let mut r = rng::stream(seed, &path);
        let plate = spawn_plate(&PlateSpec::new("probe", &[(name, 1)]), table, r.gen())?;
        let overhead = render_overhead(&plate, &mut r);
        let dets = detect_items(&overhead, &plate, &DetectorConfig::perfect(), &mut r);
        let mount = random_mount_offset(&mut r);
        let mut streams = Streams::new(seed, &path);
        let mut servo = ServoMode::Oracle {
            sigma_px: cfg.servo_sigma_px,
        };
        let result = approach(&plate, &overhead, &dets[0], mount, &mut servo, &mut streams)
            .and_then(|a| Ok((probe(&plate, &a, &ExecConfig::default(), &mut streams)?, a)));
        match result {
            Ok((rec, a)) => {
                return Ok(Example {
                    image: rec.image,
                    overhead: a.overhead_crop,
                    trace: rec.trace,
                    label: label_for(arch.compliance),
                    archetype: name.to_string(),
                    tags: arch.tags.clone(),
                })
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// `n_test + n_base` probe examples; the first `n_test` are the test split.
pub fn generate_dataset(table: &ArchetypeTable, cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let orders = class_orders(table)?;
    if cfg.n_base == 0 {
        return Err(Error::Config("n_base must be positive".into()));
    }
    let mut all = Vec::with_capacity(cfg.n_base + cfg.n_test);
    for i in 0..cfg.n_base + cfg.n_test {
        all.push(probe_example(table, archetype_for(&orders, i), cfg, seed, i)?);
    }
    let train = all.split_off(cfg.n_test);
    Ok(Dataset { train, test: all })
}

/// SHA-256 of an example's JSON encoding.
pub fn checksum(ex: &Example) -> String {
    let json = serde_json::to_vec(ex).expect("examples serialize");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_jsonl(examples: &[Example], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut out, ex).map_err(|e| Error::json("example", e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Example>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), n + 1), e))?;
        ex.trace.validate()?;
        out.push(ex);
    }
    Ok(out)
}

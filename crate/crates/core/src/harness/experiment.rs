//! Plate clearing and method comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trial::{run_acquisition_attempt, walk_mount, Policy, ServoSetting, TrialConfig};
use crate::error::{Error, Result};
use crate::perception::{detect_items, render_overhead, HeatmapNet};
use crate::policy::PolicyModel;
use crate::rng::{self, tag};
use crate::simworld::{remove_item, spawn_plate, ArchetypeTable, FailureMode, PlateSpec};

pub const CSV_HEADER: [&str; 11] = [
    "plate",
    "mode",
    "seed",
    "acquired",
    "attempts",
    "miss",
    "drop",
    "unstable",
    "damage",
    "detection",
    "retries",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub items_acquired: usize,
    pub total_attempts: usize,
    pub miss: usize,
    pub drop: usize,
    pub unstable: usize,
    pub damage: usize,
    pub detection: usize,
    /// Items abandoned after `max_retries` failed attempts.
    pub exceeded_retries: usize,
    pub initial_items: usize,
}

impl Metrics {
    pub fn success_rate(&self) -> f64 {
        if self.total_attempts == 0 {
            0.0
        } else {
            self.items_acquired as f64 / self.total_attempts as f64
        }
    }

    pub fn failures(&self) -> usize {
        self.miss + self.drop + self.unstable + self.damage + self.detection
    }

    fn record(&mut self, mode: FailureMode) {
        if mode == FailureMode::ExceededRetries {
            self.exceeded_retries += 1;
            return;
        }
        match mode {
            FailureMode::None => self.items_acquired += 1,
            FailureMode::Miss => self.miss += 1,
            FailureMode::DropAfterSkewer => self.drop += 1,
            FailureMode::Unstable => self.unstable += 1,
            FailureMode::Damage => self.damage += 1,
            FailureMode::DetectionMiss => self.detection += 1,
            FailureMode::ExceededRetries => unreachable!(),
        }
        self.total_attempts += 1;
    }

    pub fn add(&mut self, o: &Metrics) {
        self.items_acquired += o.items_acquired;
        self.total_attempts += o.total_attempts;
        self.miss += o.miss;
        self.drop += o.drop;
        self.unstable += o.unstable;
        self.damage += o.damage;
        self.detection += o.detection;
        self.exceeded_retries += o.exceeded_retries;
        self.initial_items += o.initial_items;
    }

    /// Bookkeeping identities every experiment must satisfy.
    pub fn check(&self, max_retries: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("metrics invariant: {m}")));
        if self.total_attempts < self.items_acquired {
            return bad(format!(
                "{} acquired > {} attempts",
                self.items_acquired, self.total_attempts
            ));
        }
        if self.items_acquired + self.failures() != self.total_attempts {
            return bad(format!("acquired + failures != attempts in {self:?}"));
        }
        if self.items_acquired + self.exceeded_retries > self.initial_items {
            return bad(format!("more items resolved than placed in {self:?}"));
        }
        let per_item_cap = self.initial_items * (max_retries + 1);
        if self.total_attempts - self.detection.min(self.total_attempts) > per_item_cap {
            return bad(format!("attempt count exceeds retry cap in {self:?}"));
        }
        Ok(())
    }
}

/// Outcome of one plate, plus the per-item failure tallies behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateRun {
    pub metrics: Metrics,
    /// Failed attempts charged to each item.
    pub failures_per_item: BTreeMap<u32, usize>,
    pub acquired_items: Vec<u32>,
}

/// Clears one plate: detect, attempt the detection nearest the fork, retry
/// failed items up to `max_retries` times.
pub fn run_plate_experiment(
    spec: &PlateSpec,
    table: &ArchetypeTable,
    policy: &mut Policy<'_>,
    cfg: &TrialConfig,
    mut servo_net: Option<&mut HeatmapNet>,
) -> Result<PlateRun> {
    cfg.validate()?;
    if cfg.servo == ServoSetting::Learned && servo_net.is_none() {
        return Err(Error::Config("learned servo needs a heatmap model".into()));
    }
    let seed = cfg.seed;
    let mut plate = spawn_plate(spec, table, rng::derive(seed, &[tag::PLATE]))?;
    let mut metrics = Metrics {
        initial_items: plate.items.len(),
        ..Metrics::default()
    };
    let mut failures: BTreeMap<u32, usize> = BTreeMap::new();
    let mut exhausted: BTreeSet<u32> = BTreeSet::new();
    let mut acquired = Vec::new();
    let mut fork_xy = [0.0, 0.0];
    let mut mount = [0.0, 0.0];
    let mut mount_rng = rng::stream(seed, &[tag::MOUNT]);
    let max_rounds = metrics.initial_items * (cfg.max_retries + 1) + 16;

    for round in 0..max_rounds as u64 {
        if plate.items.is_empty() {
            break;
        }
        let overhead = render_overhead(&plate, &mut rng::stream(seed, &[tag::RENDER, round]));
        let dets = detect_items(
            &overhead,
            &plate,
            &cfg.detector,
            &mut rng::stream(seed, &[tag::DETECT, round]),
        );
        let fork_px = overhead.world_to_px(fork_xy);
        let target = dets
            .iter()
            .filter(|d| d.truth.map_or(true, |id| !exhausted.contains(&id)))
            .min_by(|a, b| {
                let da = (a.cx - fork_px[0]).powi(2) + (a.cy - fork_px[1]).powi(2);
                let db = (b.cx - fork_px[0]).powi(2) + (b.cy - fork_px[1]).powi(2);
                da.total_cmp(&db)
            });
        let Some(det) = target else { break };
        let report = run_acquisition_attempt(
            &plate,
            &overhead,
            det,
            policy,
            cfg,
            mount,
            servo_net.as_deref_mut(),
            &[round],
        )?;
        metrics.record(report.outcome.failure_mode);
        fork_xy = overhead.px_to_world([det.cx, det.cy]);
        if report.outcome.is_success() {
            let id = report.contact_item.expect("success has an item");
            plate = remove_item(&plate, id)?;
            exhausted.remove(&id);
            acquired.push(id);
        } else if let Some(id) = report.target {
            let n = failures.entry(id).or_insert(0);
            *n += 1;
            if *n >= cfg.max_retries {
                exhausted.insert(id);
            }
        }
        if report.primitive.is_some() {
            mount = walk_mount(mount, cfg.mount_walk_sigma, &mut mount_rng);
        }
    }
    // An exhausted item can still come off the plate on another item's attempt.
    metrics.exceeded_retries = exhausted.len();
    metrics.check(cfg.max_retries)?;
    Ok(PlateRun {
        metrics,
        failures_per_item: failures,
        acquired_items: acquired,
    })
}

/// Which policy a comparison row uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Learned(crate::policy::PolicyMode),
    Oracle,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Learned(m) => m.name().to_string(),
            Method::Oracle => "oracle".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub plate: String,
    pub mode: String,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// Summed metrics for one mode over every plate and seed.
    pub fn pooled(&self, mode: &str) -> Metrics {
        let mut m = Metrics::default();
        for r in self.rows.iter().filter(|r| r.mode == mode) {
            m.add(&r.metrics);
        }
        m
    }

    /// Summed metrics for one `(plate, mode)` cell.
    pub fn cell(&self, plate: &str, mode: &str) -> Metrics {
        let mut m = Metrics::default();
        for r in self.rows.iter().filter(|r| r.mode == mode && r.plate == plate) {
            m.add(&r.metrics);
        }
        m
    }

    pub fn modes(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.mode) {
                v.push(r.mode.clone());
            }
        }
        v
    }

    pub fn plates(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.plate) {
                v.push(r.plate.clone());
            }
        }
        v
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.plate.clone(),
                r.mode.clone(),
                r.seed.to_string(),
                m.items_acquired.to_string(),
                m.total_attempts.to_string(),
                m.miss.to_string(),
                m.drop.to_string(),
                m.unstable.to_string(),
                m.damage.to_string(),
                m.detection.to_string(),
                m.exceeded_retries.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// One line per mode: `mode,acquired,attempts,success_rate`.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["mode", "acquired", "attempts", "success_rate"])?;
        for mode in self.modes() {
            let m = self.pooled(&mode);
            w.write_record([
                mode.clone(),
                m.items_acquired.to_string(),
                m.total_attempts.to_string(),
                format!("{:.4}", m.success_rate()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs every `(spec, method, seed)` cell. Learned methods look up their
/// model in `models`; rows are ordered by spec, method, seed.
#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    specs: &[PlateSpec],
    methods: &[Method],
    models: &BTreeMap<crate::policy::PolicyMode, PolicyModel>,
    seeds: &[u64],
    table: &ArchetypeTable,
    base: &TrialConfig,
    servo_net: Option<&HeatmapNet>,
) -> Result<Comparison> {
    use rayon::prelude::*;
    let mut cells = Vec::new();
    for spec in specs {
        for method in methods {
            if let Method::Learned(mode) = method {
                if !models.contains_key(mode) {
                    return Err(Error::Checkpoint(format!("no trained model for {mode}")));
                }
            }
            for &seed in seeds {
                cells.push((spec, *method, seed));
            }
        }
    }
    let pool = crate::tinynn::batch::thread_pool();
    let rows: Vec<Result<ComparisonRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(spec, method, seed)| {
                let cfg = TrialConfig { seed: *seed, ..*base };
                let mut net = servo_net.cloned();
                let mut model = match method {
                    Method::Learned(mode) => Some(models[mode].clone()),
                    Method::Oracle => None,
                };
                let mut policy = match model.as_mut() {
                    Some(m) => Policy::Learned(m),
                    None => Policy::Oracle,
                };
                let run = run_plate_experiment(spec, table, &mut policy, &cfg, net.as_mut())?;
                Ok(ComparisonRow {
                    plate: spec.label.clone(),
                    mode: method.name(),
                    seed: *seed,
                    metrics: run.metrics,
                })
            })
            .collect()
    });
    Ok(Comparison {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

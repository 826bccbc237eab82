//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.
//!
//! The stages run inside one test so trained models are shared and the
//! heavy work runs sequentially.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use skewersim::harness::experiment::Method;
use skewersim::harness::manifest::MANIFEST_FILE;
use skewersim::harness::*;
use skewersim::perception::render::LOCAL_MPP;
use skewersim::perception::servo_model::{
    build_servo_dataset, keypoint_error, split_holdout, train_servo_model, HeatmapNet, ServoExample, ServoTrainConfig,
};
use skewersim::perception::{servo_loop, ServoMode};
use skewersim::policy::train::{predict_example, sample_efficiency_sweep};
use skewersim::policy::*;
use skewersim::rng;
use skewersim::simworld::archetype::{Confounder, PlateSpec};
use skewersim::simworld::material::{piecewise_force, tilt_lift};
use skewersim::simworld::primitive::{execute_primitive, Action, ExecConfig};
use skewersim::simworld::*;
use skewersim::tinynn::{gradient_check, Module, Tensor};

const DATA_SEED: u64 = 11;
const TRAIN_SEED: u64 = 3;
const PLATE_SEEDS: u64 = 30;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Sheet {
    rows: Vec<Outcome>,
}

impl Sheet {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        self.rows.push(Outcome { id, pass, detail });
    }
}

fn mins(d: Duration) -> f64 {
    d.as_secs_f64() / 60.0
}

fn subset_accuracy(model: &mut PolicyModel, test: &[Example], tags: &[Confounder]) -> (usize, usize) {
    let mut hit = (0, 0);
    for ex in test.iter().filter(|e| tags.iter().any(|t| e.has_tag(*t))) {
        hit.1 += 1;
        if predict_example(model, ex).unwrap().0 == ex.label {
            hit.0 += 1;
        }
    }
    hit
}

fn ratio(h: (usize, usize)) -> f64 {
    h.0 as f64 / h.1.max(1) as f64
}

/// Criteria 1, 2, 8 and 9 share one dataset and one set of trained models.
fn policy_criteria(sheet: &mut Sheet) {
    let table = ArchetypeTable::default();
    let clock = Instant::now();
    let ds = generate_dataset(&table, &DatasetConfig::default(), DATA_SEED).unwrap();

    let mut models = BTreeMap::new();
    let mut c2 = Vec::new();
    let mut c2_pass = true;
    for mode in PolicyMode::ALL {
        let t = Instant::now();
        let mut trained = train_policy(&ds.train, mode, &TrainConfig::default(), TRAIN_SEED).unwrap();
        let took = t.elapsed();
        c2_pass &= took <= Duration::from_secs(300);
        let cm = evaluate_confusion(&mut trained.model, &ds.test).unwrap();
        match mode {
            PolicyMode::Multimodal => {
                c2_pass &= cm.accuracy() >= 0.90 && cm.class_accuracy(0) >= 0.85 && cm.class_accuracy(1) >= 0.85;
                c2.push(format!(
                    "multimodal acc {:.3} vertical {:.3} angled {:.3}",
                    cm.accuracy(),
                    cm.class_accuracy(0),
                    cm.class_accuracy(1)
                ));
            }
            PolicyMode::VisionOnly => {
                let h = subset_accuracy(&mut trained.model, &ds.test, &[Confounder::MisleadingPair]);
                c2_pass &= ratio(h) <= 0.60;
                c2.push(format!("vision_only misleading pairs {}/{}", h.0, h.1));
            }
            PolicyMode::HapticOnly => {
                let h = subset_accuracy(
                    &mut trained.model,
                    &ds.test,
                    &[Confounder::HeterogeneousContact, Confounder::ThinPlateContact],
                );
                c2_pass &= ratio(h) <= 0.70;
                c2.push(format!("haptic_only heterogeneous/thin {}/{}", h.0, h.1));
            }
            PolicyMode::OpenLoop => {}
        }
        c2.push(format!("{mode} trained in {:.0}s", took.as_secs_f64()));
        models.insert(mode, trained.model);
    }
    sheet.record(2, c2_pass, c2.join(", "));

    let mut methods: Vec<Method> = PolicyMode::ALL.iter().map(|m| Method::Learned(*m)).collect();
    methods.push(Method::Oracle);
    let seeds: Vec<u64> = (0..PLATE_SEEDS).collect();
    let specs = PlateSpec::evaluation_plates();
    let cmp = compare_methods(&specs, &methods, &models, &seeds, &table, &TrialConfig::default(), None).unwrap();
    let total = clock.elapsed();

    let rate = |m: &str| cmp.pooled(m).success_rate();
    let (mm, vo, ho, ol) = (
        rate("multimodal"),
        rate("vision_only"),
        rate("haptic_only"),
        rate("open_loop"),
    );
    let min_attempts = PolicyMode::ALL
        .iter()
        .map(|m| cmp.pooled(m.name()).total_attempts)
        .min()
        .unwrap();
    let c1 = mm > ho && mm >= vo + 0.05 && mm >= ol + 0.05 && min_attempts >= 300 && total <= Duration::from_secs(600);
    sheet.record(
        1,
        c1,
        format!(
            "pooled multimodal {mm:.3}, haptic_only {ho:.3}, vision_only {vo:.3}, open_loop {ol:.3}, \
             oracle {:.3}; min attempts {min_attempts}; data+train+compare {:.1} min",
            rate("oracle"),
            mins(total)
        ),
    );

    let mut bad = Vec::new();
    for r in &cmp.rows {
        let m = &r.metrics;
        let ok = m.check(TrialConfig::default().max_retries).is_ok()
            && m.items_acquired + m.failures() == m.total_attempts
            && m.items_acquired + m.exceeded_retries <= m.initial_items;
        if !ok {
            bad.push(format!("{}/{}/{}", r.plate, r.mode, r.seed));
        }
    }
    sheet.record(
        8,
        bad.is_empty(),
        format!(
            "{} experiments checked, {} violations {bad:?}",
            cmp.rows.len(),
            bad.len()
        ),
    );

    let mut c9 = Vec::new();
    for p in cmp.plates() {
        let oracle = cmp.cell(&p, "oracle").success_rate();
        for mode in PolicyMode::ALL {
            let r = cmp.cell(&p, mode.name()).success_rate();
            if r > oracle {
                c9.push(format!("{p}: {mode} {r:.3} > oracle {oracle:.3}"));
            }
        }
    }
    sheet.record(
        9,
        c9.is_empty(),
        if c9.is_empty() {
            "oracle never beaten".into()
        } else {
            c9.join("; ")
        },
    );
}

fn sweep_criterion(sheet: &mut Sheet) {
    let ds = generate_dataset(&ArchetypeTable::default(), &DatasetConfig::default(), DATA_SEED).unwrap();
    let seeds = [1, 2, 3];
    let rows = sample_efficiency_sweep(&ds.train, &ds.test, &[0.10, 1.00], &seeds, &TrainConfig::default()).unwrap();
    let mean = |f: f64| {
        let v: Vec<f64> = rows.iter().filter(|r| r.fraction == f).map(|r| r.overall_acc).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (lo, hi) = (mean(0.10), mean(1.00));
    sheet.record(
        3,
        hi >= lo + 0.03,
        format!(
            "mean accuracy {lo:.3} at 10% vs {hi:.3} at 100% over {} seeds",
            seeds.len()
        ),
    );
}

fn gradient_criterion(sheet: &mut Sheet) {
    let mut r = rng::stream(21, &[]);
    let img = Tensor::uniform(&[3, 32, 32], 1.0, &mut r);
    let trace: Vec<f64> = (0..TRACE_LEN).map(|_| r.gen_range(0.0..3.0)).collect();
    let mut policy = PolicyModel::seeded(PolicyMode::Multimodal, 5);
    let e_policy = gradient_check(&mut policy, |m, bw| m.loss(Some(&img), Some(&trace), 1, bw)).unwrap();
    let mut net = HeatmapNet::new(&mut rng::stream(6, &[]));
    let ex = ServoExample::random(16, &mut r);
    let e_heat = gradient_check(&mut net, |n, bw| n.loss(&ex, bw)).unwrap();
    // A backward pass that overstates one layer's gradient by half.
    let mut broken = PolicyModel::seeded(PolicyMode::Multimodal, 5);
    let e_broken = gradient_check(&mut broken, |m, bw| {
        let l = m.loss(Some(&img), Some(&trace), 1, bw)?;
        if bw {
            let last = m.params_mut().into_iter().last().unwrap();
            for g in last.grad.data.iter_mut() {
                *g *= 1.5;
            }
        }
        Ok(l)
    })
    .unwrap();
    sheet.record(
        4,
        e_policy < 1e-4 && e_heat < 1e-4 && e_broken > 1e-2,
        format!("policy {e_policy:.2e}, heatmap {e_heat:.2e}, corrupted backward {e_broken:.2e}"),
    );
}

fn servo_criterion(sheet: &mut Sheet) {
    let table = ArchetypeTable::default();
    let mut worst = (0.0f64, 0usize);
    let mut r = rng::stream(0, &[]);
    for (name, _) in table.seen() {
        let plate = spawn_plate(&PlateSpec::new("one", &[(name, 1)]), &table, 5).unwrap();
        let item = &plate.items[0];
        for radius in [0.0, 6.0, 12.0, 18.0, 24.0] {
            for k in 0..12 {
                let a = k as f64 * std::f64::consts::TAU / 12.0;
                let start = [
                    item.center[0] + radius * LOCAL_MPP * a.cos(),
                    item.center[1] + radius * LOCAL_MPP * a.sin(),
                    item.height + 0.03,
                ];
                let mut mode = ServoMode::Oracle { sigma_px: 0.0 };
                let res = servo_loop(&plate, &ForkState::at(start), &mut mode, 20, &mut r).unwrap();
                let d = res.offset_px.map_or(f64::INFINITY, |d| d[0].hypot(d[1]));
                worst = (worst.0.max(d), worst.1.max(res.steps));
            }
        }
    }
    let t = Instant::now();
    let cfg = ServoTrainConfig::default();
    let data = build_servo_dataset(&table, &cfg, 1).unwrap();
    let (train, held) = split_holdout(&data, &cfg);
    let mut trained = train_servo_model(&train, &cfg, 1).unwrap();
    let err = keypoint_error(&mut trained.model, &held).unwrap();
    sheet.record(
        5,
        worst.0 <= 1.0 && worst.1 <= 9 && err <= 2.0,
        format!(
            "oracle worst final offset {:.2} px in at most {} steps; learned held-out error {err:.2} px \
             ({} examples, trained in {:.0}s)",
            worst.0,
            worst.1,
            held.len(),
            t.elapsed().as_secs_f64()
        ),
    );
}

fn safety_criterion(sheet: &mut Sheet) {
    let table = ArchetypeTable::default();
    let specs = PlateSpec::evaluation_plates();
    let mut r = rng::stream(77, &[]);
    let mut violations = Vec::new();
    let mut n = 0;
    let cfg = ExecConfig::default();
    while n < 10_000 {
        let spec = &specs[n / 100 % specs.len()];
        let plate = spawn_plate(spec, &table, n as u64).unwrap();
        for _ in 0..100 {
            let item = &plate.items[r.gen_range(0..plate.items.len())];
            let xy = [
                item.center[0] + r.gen_range(-0.02..0.02),
                item.center[1] + r.gen_range(-0.02..0.02),
            ];
            let gamma = r.gen_range(-3.1..3.1);
            let top = plate.surface_z(xy) + r.gen_range(0.001..0.03);
            let action = match r.gen_range(0..4) {
                0 => Action::probe(xy[0], xy[1], top - APPROACH_HEIGHT, gamma),
                1 => Action::skewer(Primitive::VerticalSkewer, xy[0], xy[1], top, gamma),
                2 => Action::skewer(Primitive::AngledSkewer, xy[0], xy[1], top, gamma),
                _ => Action::scoop(xy[0], xy[1], top, gamma),
            };
            let ex = execute_primitive(&plate, &ForkState::at([xy[0], xy[1], top]), &action, &cfg, &mut r).unwrap();
            let k = plate.item_at(xy).map_or(0.0, |i| i.local_stiffness(xy));
            let step = (k * tilt_lift(ANGLED_TILT, k) + plate.plate_stiffness) * VERTICAL_SPEED * DT;
            for p in &ex.trajectory {
                if p.z < plate.plate_z - Z_TOLERANCE || p.force > FORCE_LIMIT + step {
                    violations.push(format!("{:?} z {:.4} force {:.2}", action.primitive, p.z, p.force));
                    break;
                }
            }
            n += 1;
        }
    }
    let mut non_monotone = 0;
    for _ in 0..1000 {
        let (k, ff, h) = (
            r.gen_range(1.0..10_000.0),
            r.gen_range(0.1..60.0),
            r.gen_range(0.002..0.04),
        );
        let mut prev = 0.0;
        for i in 0..=400 {
            let p = i as f64 * h / 400.0;
            if k * p > ff {
                break;
            }
            let f = piecewise_force(k, ff, p, h, 6000.0);
            if f < prev {
                non_monotone += 1;
                break;
            }
            prev = f;
        }
    }
    sheet.record(
        6,
        violations.is_empty() && non_monotone == 0,
        format!(
            "{n} primitives, {} floor/force violations {:?}; {non_monotone}/1000 materials non-monotone before fracture",
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

/// Runs every subcommand twice with small configs and compares all
/// artifacts except the manifest byte for byte.
fn determinism_criterion(sheet: &mut Sheet) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let configs = [
        ("gd.json", r#"{"dataset": {"n_base": 24, "n_test": 12}}"#),
        (
            "tr.json",
            r#"{"mode": "multimodal", "data": {"dir": "data"}, "train": {"epochs": 2, "augmentation": {"copies": 2}}}"#,
        ),
        (
            "ev.json",
            r#"{"model": "model/policy_multimodal.json", "data": {"dir": "data"}}"#,
        ),
        (
            "sw.json",
            r#"{"data": {"dir": "data"}, "fractions": [0.5, 1.0], "seeds": 2, "train": {"epochs": 1, "augmentation": {"copies": 1}}}"#,
        ),
        (
            "ts.json",
            r#"{"servo": {"base_renders": 10, "augmented_total": 40, "epochs": 1}}"#,
        ),
        (
            "rp.json",
            r#"{"method": "multimodal", "model": "model/policy_multimodal.json", "seeds": 2}"#,
        ),
        (
            "cmp.json",
            r#"{"methods": ["haptic_only", "oracle"], "data": {"dir": "data"}, "train": {"epochs": 1, "augmentation": {"copies": 1}}, "seeds": 2}"#,
        ),
        ("gc.json", r#"{"modes": ["haptic_only"], "heatmap": true}"#),
    ];
    for (f, text) in configs {
        std::fs::write(dir.join(f), text).unwrap();
    }
    // Later steps read the first run's data and model.
    let steps: [(&str, &str, &str); 9] = [
        ("gen-data", "gd.json", "data"),
        ("train", "tr.json", "model"),
        ("eval", "ev.json", "eval"),
        ("export-embeddings", "ev.json", "emb"),
        ("sweep", "sw.json", "sweep"),
        ("train-servo", "ts.json", "servo"),
        ("run-plates", "rp.json", "plates"),
        ("compare", "cmp.json", "cmp"),
        ("gradcheck", "gc.json", "grad"),
    ];
    let mut mismatched = Vec::new();
    for (cmd, cfg, out) in steps {
        for run in ["", "_again"] {
            let o = Command::new(env!("CARGO_BIN_EXE_skewersim"))
                .current_dir(dir)
                .args([cmd, "--config", cfg, "--seed", "42", "--out", &format!("{out}{run}")])
                .output()
                .unwrap();
            if !o.status.success() {
                mismatched.push(format!(
                    "{cmd} exited {:?}: {}",
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                ));
            }
        }
        let a = dir.join(out);
        let b = dir.join(format!("{out}_again"));
        let files = artifact_files(&a);
        if files.is_empty() || files != artifact_files(&b) {
            mismatched.push(format!("{cmd}: artifact sets differ"));
            continue;
        }
        for f in &files {
            if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
                mismatched.push(format!("{cmd}: {f}"));
            }
        }
    }
    sheet.record(
        7,
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} subcommands byte-identical across two runs", steps.len())
        } else {
            mismatched.join("; ")
        },
    );
}

fn artifact_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|f| f != MANIFEST_FILE)
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn acceptance() {
    let mut sheet = Sheet::default();
    policy_criteria(&mut sheet);
    sweep_criterion(&mut sheet);
    gradient_criterion(&mut sheet);
    servo_criterion(&mut sheet);
    safety_criterion(&mut sheet);
    determinism_criterion(&mut sheet);
    sheet.rows.sort_by_key(|o| o.id);
    println!("summary:");
    for o in &sheet.rows {
        println!("  {} criterion {}", if o.pass { "PASS" } else { "FAIL" }, o.id);
    }
    let failed: Vec<String> = sheet
        .rows
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{}: {}", o.id, o.detail))
        .collect();
    assert_eq!(sheet.rows.len(), 9);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

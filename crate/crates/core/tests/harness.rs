use std::collections::BTreeMap;

use skewersim::harness::experiment::CSV_HEADER;
use skewersim::harness::*;
use skewersim::simworld::archetype::{ArchetypeTable, PlateSpec};
use skewersim::simworld::{FailureMode, Primitive};

fn table() -> ArchetypeTable {
    ArchetypeTable::default()
}

#[test]
fn noise_free_oracle_clears_every_evaluation_plate() {
    let t = table();
    for spec in PlateSpec::evaluation_plates() {
        for seed in 0..3 {
            let cfg = TrialConfig::noise_free(seed);
            let run = run_plate_experiment(&spec, &t, &mut Policy::Oracle, &cfg, None).unwrap();
            let m = run.metrics;
            assert_eq!(
                (m.items_acquired, m.total_attempts),
                (spec.item_count(), spec.item_count()),
                "{} seed {seed}: {m:?}",
                spec.label
            );
        }
    }
}

#[test]
fn empty_plate_has_no_attempts() {
    let spec = PlateSpec::new("empty", &[]);
    let run = run_plate_experiment(&spec, &table(), &mut Policy::Oracle, &TrialConfig::default(), None).unwrap();
    assert_eq!(run.metrics.items_acquired, 0);
    assert_eq!(run.metrics.total_attempts, 0);
}

#[test]
fn zero_retries_is_rejected() {
    let cfg = TrialConfig {
        max_retries: 0,
        ..TrialConfig::default()
    };
    let spec = &PlateSpec::evaluation_plates()[0];
    assert!(run_plate_experiment(spec, &table(), &mut Policy::Oracle, &cfg, None).is_err());
}

#[test]
fn learned_servo_without_model_is_rejected() {
    let cfg = TrialConfig {
        servo: ServoSetting::Learned,
        ..TrialConfig::default()
    };
    let spec = &PlateSpec::evaluation_plates()[0];
    assert!(run_plate_experiment(spec, &table(), &mut Policy::Oracle, &cfg, None).is_err());
}

#[test]
fn accounting_holds_under_noise_and_wrong_primitives() {
    let t = table();
    for spec in PlateSpec::evaluation_plates() {
        for (i, p) in [Primitive::VerticalSkewer, Primitive::AngledSkewer]
            .into_iter()
            .enumerate()
        {
            let cfg = TrialConfig {
                seed: 100 + i as u64,
                ..TrialConfig::default()
            };
            let run = run_plate_experiment(&spec, &t, &mut Policy::Fixed(p), &cfg, None).unwrap();
            let m = run.metrics;
            assert_eq!(m.items_acquired + m.failures(), m.total_attempts);
            assert!(run.failures_per_item.values().all(|&n| n <= cfg.max_retries));
            let exhausted: Vec<u32> = run
                .failures_per_item
                .iter()
                .filter(|(id, &n)| n >= cfg.max_retries && !run.acquired_items.contains(id))
                .map(|(id, _)| *id)
                .collect();
            assert_eq!(exhausted.len(), m.exceeded_retries);
            assert!(m.total_attempts >= m.items_acquired + exhausted.len() * cfg.max_retries);
        }
    }
}

#[test]
fn plate_runs_are_deterministic() {
    let spec = &PlateSpec::evaluation_plates()[2];
    let cfg = TrialConfig {
        seed: 9,
        ..TrialConfig::default()
    };
    let a = run_plate_experiment(spec, &table(), &mut Policy::Oracle, &cfg, None).unwrap();
    let b = run_plate_experiment(spec, &table(), &mut Policy::Oracle, &cfg, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn vertical_on_soft_drops_more_than_angled() {
    // Paired stubs on single soft items: same plates, same noise.
    let t = table();
    let spec = PlateSpec::new("soft", &[("banana", 1)]);
    let mut fails = [0usize; 2];
    for seed in 0..500 {
        let cfg = TrialConfig {
            max_retries: 1,
            seed,
            ..TrialConfig::default()
        };
        for (k, p) in [Primitive::VerticalSkewer, Primitive::AngledSkewer]
            .into_iter()
            .enumerate()
        {
            let run = run_plate_experiment(&spec, &t, &mut Policy::Fixed(p), &cfg, None).unwrap();
            fails[k] += run.metrics.drop;
        }
    }
    assert!(
        fails[0] > fails[1] + 50,
        "vertical drops {} vs angled {}",
        fails[0],
        fails[1]
    );
}

#[test]
fn false_positive_target_is_a_detection_miss() {
    use skewersim::perception::detect::Detection;
    use skewersim::perception::render_overhead;
    use skewersim::rng;
    use skewersim::simworld::spawn_plate;
    let spec = PlateSpec::new("one", &[("raw_carrot", 1)]);
    let plate = spawn_plate(&spec, &table(), 1).unwrap();
    let overhead = render_overhead(&plate, &mut rng::stream(1, &[]));
    // Far corner of the image, off the plate.
    let det = Detection {
        cx: 2.0,
        cy: 2.0,
        w: 6.0,
        h: 6.0,
        truth: None,
    };
    let r = run_acquisition_attempt(
        &plate,
        &overhead,
        &det,
        &mut Policy::Oracle,
        &TrialConfig::default(),
        [0.0, 0.0],
        None,
        &[0],
    )
    .unwrap();
    assert_eq!(r.outcome.failure_mode, FailureMode::DetectionMiss);
    assert_eq!(plate.items.len(), 1);
}

#[test]
fn single_cell_comparison_equals_lone_run() {
    let specs = vec![PlateSpec::evaluation_plates()[3].clone()];
    let base = TrialConfig::default();
    let cmp = compare_methods(&specs, &[Method::Oracle], &BTreeMap::new(), &[4], &table(), &base, None).unwrap();
    let cfg = TrialConfig { seed: 4, ..base };
    let run = run_plate_experiment(&specs[0], &table(), &mut Policy::Oracle, &cfg, None).unwrap();
    assert_eq!(cmp.rows.len(), 1);
    assert_eq!(cmp.rows[0].metrics, run.metrics);
    assert_eq!(cmp.pooled("oracle"), run.metrics);
}

#[test]
fn missing_model_is_a_checkpoint_error() {
    let specs = PlateSpec::evaluation_plates();
    let r = compare_methods(
        &specs[..1],
        &[Method::Learned(skewersim::policy::PolicyMode::Multimodal)],
        &BTreeMap::new(),
        &[0],
        &table(),
        &TrialConfig::default(),
        None,
    );
    assert!(matches!(r, Err(skewersim::Error::Checkpoint(_))));
}

#[test]
fn comparison_csv_has_fixed_header_and_is_reproducible() {
    let specs = PlateSpec::evaluation_plates()[..2].to_vec();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let cmp = compare_methods(
            &specs,
            &[Method::Oracle],
            &BTreeMap::new(),
            &[1, 2],
            &table(),
            &TrialConfig::default(),
            None,
        )
        .unwrap();
        let p = dir.path().join(format!("c{k}.csv"));
        cmp.write_csv(&p).unwrap();
        bytes.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let mut rd = csv::Reader::from_reader(bytes[0].as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][0], "plate1");
    assert_eq!(&rows[1][2], "2");
}

use std::path::Path;
use std::process::{Command, Output};

use skewersim::harness::experiment::CSV_HEADER;
use skewersim::harness::manifest::{sha256_hex, Manifest, MANIFEST_FILE};

fn skewersim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewersim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn check_manifest(out: &Path, command: &str, seed: u64) -> Manifest {
    let m = Manifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.command, command);
    assert_eq!(m.seed, seed);
    for a in &m.artifacts {
        let bytes = std::fs::read(out.join(&a.file)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.file);
    }
    m
}

#[test]
fn missing_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = skewersim(tmp.path(), &["run-plates", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.json") && err.contains("No such file"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(skewersim(tmp.path(), &["fly"]).status.code(), Some(1));
    assert_eq!(skewersim(tmp.path(), &["eval", "--bogus"]).status.code(), Some(1));
    assert_eq!(skewersim(tmp.path(), &[]).status.code(), Some(1));
    assert_eq!(skewersim(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"seedz": 3}"#);
    let o = skewersim(tmp.path(), &["run-plates", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seedz"));
}

#[test]
fn eval_without_model_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(skewersim(tmp.path(), &["eval"]).status.code(), Some(1));
}

#[test]
fn run_plates_writes_metrics_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"seeds": 2}"#);
    let o = skewersim(
        tmp.path(),
        &["run-plates", "--config", "c.json", "--seed", "7", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("o");
    let m = check_manifest(&out, "run-plates", 7);
    assert_eq!(m.artifacts.len(), 1);
    let mut rd = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let seeds: Vec<String> = rd.records().map(|r| r.unwrap()[2].to_string()).collect();
    assert_eq!(seeds.len(), 12);
    assert_eq!(&seeds[..2], &["7", "8"]);
}

#[test]
fn gradcheck_passes_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "g.json", r#"{"modes": ["vision_only"], "heatmap": true}"#);
    let o = skewersim(
        tmp.path(),
        &["gradcheck", "--config", "g.json", "--seed", "1", "--out", "g"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let worst: f64 = text
        .lines()
        .last()
        .and_then(|l| l.rsplit(' ').next())
        .and_then(|v| v.parse().ok())
        .expect("last line ends with the error");
    assert!(worst < 1e-4);
    check_manifest(&tmp.path().join("g"), "gradcheck", 1);
}

#[test]
fn gradcheck_exit_code_follows_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "g.json",
        r#"{"modes": ["haptic_only"], "heatmap": false, "tolerance": 1e-12}"#,
    );
    let o = skewersim(tmp.path(), &["gradcheck", "--config", "g.json", "--out", "g"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_checkpoint_mode_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "t.json",
        r#"{"mode": "haptic_only", "data": {"dataset": {"n_base": 6, "n_test": 2}}, "train": {"epochs": 1, "augmentation": {"copies": 1}}}"#,
    );
    assert_eq!(
        skewersim(tmp.path(), &["train", "--config", "t.json", "--out", "t"])
            .status
            .code(),
        Some(0)
    );
    write(
        tmp.path(),
        "r.json",
        r#"{"method": "multimodal", "model": "t/policy_haptic_only.json"}"#,
    );
    assert_eq!(
        skewersim(tmp.path(), &["run-plates", "--config", "r.json"])
            .status
            .code(),
        Some(1)
    );
    write(
        tmp.path(),
        "e.json",
        r#"{"model": "t/policy_haptic_only.json", "data": {"dataset": {"n_base": 2, "n_test": 2}}}"#,
    );
    assert_eq!(
        skewersim(tmp.path(), &["export-embeddings", "--config", "e.json"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn shipped_configs_parse() {
    use skewersim::harness::cli::*;
    fn parse<T: serde::de::DeserializeOwned>(name: &str) -> T {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
    parse::<GenDataConfig>("gen_data.json");
    parse::<TrainCmdConfig>("train_multimodal.json");
    parse::<TrainServoCmdConfig>("train_servo.json");
    parse::<ModelCmdConfig>("eval.json");
    parse::<RunPlatesConfig>("run_plates_oracle.json");
    let c: CompareConfig = parse("compare.json");
    assert_eq!(c.methods.len(), 5);
    parse::<SweepCmdConfig>("sweep.json");
    parse::<GradcheckConfig>("gradcheck.json");
}

//! `skewersim` command line.
//!
//! Every subcommand takes `--config PATH` (JSON, all fields optional unless
//! noted), `--seed N` and `--out DIR`, writes its artifacts into `DIR` and
//! finishes with a `manifest.json`. Exit status is 0 on success, 1 for
//! usage or validation errors and 2 when a run fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::experiment::{compare_methods, run_plate_experiment, Comparison, ComparisonRow, Method};
use super::manifest::Manifest;
use super::trial::{Policy, ServoSetting, TrialConfig};
use crate::error::{Error, Result};
use crate::perception::servo_model::{
    build_servo_dataset, keypoint_error, split_holdout, train_servo_model, HeatmapNet, ServoTrainConfig,
};
use crate::policy::dataset::{checksum, read_jsonl, write_jsonl};
use crate::policy::train::{predict_example, primitive_name, write_embeddings_csv, write_sweep_csv, DEFAULT_FRACTIONS};
use crate::policy::{
    evaluate_confusion, export_embeddings, generate_dataset, sample_efficiency_sweep, train_policy, ConfusionMatrix,
    Dataset, DatasetConfig, Example, PolicyMode, PolicyModel, TrainConfig,
};
use crate::rng;
use crate::simworld::archetype::{ArchetypeTable, Confounder, PlateSpec};
use crate::tinynn::{gradient_check_report, Checkpoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "skewersim", version, about = "Probe-then-skewer bite acquisition simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the probe dataset (train/test JSON lines).
    GenData(Common),
    /// Train one policy mode.
    Train(Common),
    /// Train the servo heatmap model.
    TrainServo(Common),
    /// Confusion matrix of a trained policy on a test split.
    Eval(Common),
    /// Clear plates with one policy.
    RunPlates(Common),
    /// Compare policies over plate specs and seeds.
    Compare(Common),
    /// Training-set fraction sweep for the multimodal policy.
    Sweep(Common),
    /// Finite-difference gradient check of both networks.
    Gradcheck(Common),
    /// Fused embeddings of a multimodal policy.
    ExportEmbeddings(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::GenData(c) => ("gen-data", c),
            Command::Train(c) => ("train", c),
            Command::TrainServo(c) => ("train-servo", c),
            Command::Eval(c) => ("eval", c),
            Command::RunPlates(c) => ("run-plates", c),
            Command::Compare(c) => ("compare", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Gradcheck(c) => ("gradcheck", c),
            Command::ExportEmbeddings(c) => ("export-embeddings", c),
        }
    }
}

/// Where examples come from: a `gen-data` output directory, or generated
/// in memory from `dataset` and the run seed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub archetypes: Option<PathBuf>,
}

impl DataSource {
    fn table(&self) -> Result<ArchetypeTable> {
        load_table(self.archetypes.as_deref())
    }

    fn load(&self, seed: u64) -> Result<Dataset> {
        match &self.dir {
            Some(dir) => Ok(Dataset {
                train: read_jsonl(&dir.join(TRAIN_FILE))?,
                test: read_jsonl(&dir.join(TEST_FILE))?,
            }),
            None => generate_dataset(&self.table()?, &self.dataset, seed),
        }
    }
}

const TRAIN_FILE: &str = "train.jsonl";
const TEST_FILE: &str = "test.jsonl";

fn load_table(path: Option<&Path>) -> Result<ArchetypeTable> {
    match path {
        Some(p) => ArchetypeTable::load(p),
        None => Ok(ArchetypeTable::default()),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub dataset: DatasetConfig,
    pub archetypes: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub mode: PolicyMode,
    pub data: DataSource,
    pub train: TrainConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            mode: PolicyMode::Multimodal,
            data: DataSource::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainServoCmdConfig {
    pub servo: ServoTrainConfig,
    pub archetypes: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelCmdConfig {
    /// Policy checkpoint (required).
    pub model: Option<PathBuf>,
    pub data: DataSource,
}

/// A method name (`oracle` or a policy mode) and, for learned modes, its
/// checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPlatesConfig {
    pub method: String,
    pub model: Option<PathBuf>,
    pub servo_model: Option<PathBuf>,
    /// Plate specs; the six evaluation plates when absent.
    pub plates: Option<Vec<PlateSpec>>,
    pub archetypes: Option<PathBuf>,
    /// Seeds per plate, counted up from the run seed.
    pub seeds: usize,
    pub trial: TrialConfig,
}

impl Default for RunPlatesConfig {
    fn default() -> Self {
        RunPlatesConfig {
            method: "oracle".into(),
            model: None,
            servo_model: None,
            plates: None,
            archetypes: None,
            seeds: 1,
            trial: TrialConfig::default(),
        }
    }
}

/// Checkpoints listed in `models` are used as given; any other learned
/// mode is trained here on one shared dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub methods: Vec<String>,
    pub models: BTreeMap<String, PathBuf>,
    pub servo_model: Option<PathBuf>,
    pub plates: Option<Vec<PlateSpec>>,
    pub data: DataSource,
    pub train: TrainConfig,
    pub seeds: usize,
    pub trial: TrialConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        let mut methods: Vec<String> = PolicyMode::ALL.iter().map(|m| m.name().to_string()).collect();
        methods.push("oracle".into());
        CompareConfig {
            methods,
            models: BTreeMap::new(),
            servo_model: None,
            plates: None,
            data: DataSource::default(),
            train: TrainConfig::default(),
            seeds: 30,
            trial: TrialConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCmdConfig {
    pub data: DataSource,
    pub fractions: Vec<f64>,
    pub seeds: usize,
    pub train: TrainConfig,
}

impl Default for SweepCmdConfig {
    fn default() -> Self {
        SweepCmdConfig {
            data: DataSource::default(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            seeds: 3,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub modes: Vec<PolicyMode>,
    pub heatmap: bool,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            modes: PolicyMode::ALL.to_vec(),
            heatmap: true,
            tolerance: GRADCHECK_TOLERANCE,
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let (name, common) = cli.command.parts();
    match dispatch(&cli.command, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("skewersim {name}: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn read_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    let Some(p) = path else {
        return Ok(C::default());
    };
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(p.display().to_string(), e))
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Finishes a run: hashes `files` and writes the manifest.
struct Run<'a> {
    name: &'static str,
    common: &'a Common,
    started: SystemTime,
    clock: Instant,
    files: Vec<String>,
}

impl<'a> Run<'a> {
    fn start(name: &'static str, common: &'a Common) -> Result<Self> {
        create_out(&common.out)?;
        Ok(Run {
            name,
            common,
            started: SystemTime::now(),
            clock: Instant::now(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, file: &str) -> PathBuf {
        self.files.push(file.to_string());
        self.common.out.join(file)
    }

    fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let p = self.path(file);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(file, e))?;
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    }

    fn finish<C: Serialize>(self, config: &C) -> Result<()> {
        let cfg = serde_json::to_value(config).map_err(|e| Error::json("config", e))?;
        Manifest::build(
            self.name,
            self.common.seed,
            cfg,
            &self.common.out,
            &self.files,
            self.started,
            self.clock.elapsed(),
        )?
        .write(&self.common.out)
    }
}

fn dispatch(cmd: &Command, common: &Common) -> Result<i32> {
    let cfg_path = common.config.as_deref();
    match cmd {
        Command::GenData(_) => gen_data(common, &read_config(cfg_path)?),
        Command::Train(_) => train(common, &read_config(cfg_path)?),
        Command::TrainServo(_) => train_servo(common, &read_config(cfg_path)?),
        Command::Eval(_) => eval(common, &read_config(cfg_path)?),
        Command::RunPlates(_) => run_plates(common, &read_config(cfg_path)?),
        Command::Compare(_) => compare(common, &read_config(cfg_path)?),
        Command::Sweep(_) => sweep(common, &read_config(cfg_path)?),
        Command::Gradcheck(_) => gradcheck(common, &read_config(cfg_path)?),
        Command::ExportEmbeddings(_) => embeddings(common, &read_config(cfg_path)?),
    }
}

#[derive(Serialize)]
struct DatasetSummary {
    train: usize,
    test: usize,
    train_sha256: Vec<String>,
    test_sha256: Vec<String>,
}

fn gen_data(common: &Common, cfg: &GenDataConfig) -> Result<i32> {
    let mut run = Run::start("gen-data", common)?;
    let table = load_table(cfg.archetypes.as_deref())?;
    let ds = generate_dataset(&table, &cfg.dataset, common.seed)?;
    write_jsonl(&ds.train, &run.path(TRAIN_FILE))?;
    write_jsonl(&ds.test, &run.path(TEST_FILE))?;
    run.write_json(
        "dataset.json",
        &DatasetSummary {
            train: ds.train.len(),
            test: ds.test.len(),
            train_sha256: ds.train.iter().map(checksum).collect(),
            test_sha256: ds.test.iter().map(checksum).collect(),
        },
    )?;
    println!("{} train / {} test examples", ds.train.len(), ds.test.len());
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

fn model_file(mode: PolicyMode) -> String {
    format!("policy_{}.json", mode.name())
}

/// Per-class and confounder-subset accuracies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: PolicyMode,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub vertical_accuracy: f64,
    pub angled_accuracy: f64,
    pub subsets: BTreeMap<String, (usize, usize)>,
}

pub fn evaluate_report(model: &mut PolicyModel, test: &[Example]) -> Result<EvalReport> {
    let cm = evaluate_confusion(model, test)?;
    let mut subsets = BTreeMap::new();
    let groups: [(&str, &[Confounder]); 2] = [
        ("misleading_pair", &[Confounder::MisleadingPair]),
        (
            "heterogeneous_or_thin",
            &[Confounder::HeterogeneousContact, Confounder::ThinPlateContact],
        ),
    ];
    for (name, tags) in groups {
        let mut hit = (0, 0);
        for ex in test.iter().filter(|e| tags.iter().any(|t| e.has_tag(*t))) {
            hit.1 += 1;
            if predict_example(model, ex)?.0 == ex.label {
                hit.0 += 1;
            }
        }
        subsets.insert(name.to_string(), hit);
    }
    Ok(EvalReport {
        mode: model.mode,
        accuracy: cm.accuracy(),
        vertical_accuracy: cm.class_accuracy(0),
        angled_accuracy: cm.class_accuracy(1),
        confusion: cm,
        subsets,
    })
}

fn write_confusion_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["truth", "pred_vertical", "pred_angled"])?;
    for (i, row) in report.confusion.counts.iter().enumerate() {
        let truth = primitive_name(crate::policy::index_label(i));
        w.write_record([truth.to_string(), row[0].to_string(), row[1].to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn train(common: &Common, cfg: &TrainCmdConfig) -> Result<i32> {
    let mut run = Run::start("train", common)?;
    let ds = cfg.data.load(common.seed)?;
    let mut trained = train_policy(&ds.train, cfg.mode, &cfg.train, common.seed)?;
    trained.checkpoint().save(&run.path(&model_file(cfg.mode)))?;
    let curve_path = run.path("curve.csv");
    let mut w = csv::Writer::from_path(&curve_path)?;
    w.write_record(["epoch", "loss"])?;
    for (i, l) in trained.curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:.8}")])?;
    }
    w.flush().map_err(|e| Error::io(&curve_path, e))?;
    if !ds.test.is_empty() {
        let report = evaluate_report(&mut trained.model, &ds.test)?;
        println!("{}: test accuracy {:.3}", cfg.mode, report.accuracy);
        run.write_json("eval.json", &report)?;
    }
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ServoReport {
    train_examples: usize,
    holdout_examples: usize,
    final_loss: f64,
    holdout_error_px: f64,
}

fn train_servo(common: &Common, cfg: &TrainServoCmdConfig) -> Result<i32> {
    let mut run = Run::start("train-servo", common)?;
    let table = load_table(cfg.archetypes.as_deref())?;
    let data = build_servo_dataset(&table, &cfg.servo, common.seed)?;
    let (tr, held) = split_holdout(&data, &cfg.servo);
    let mut out = train_servo_model(&tr, &cfg.servo, common.seed)?;
    let err = if held.is_empty() {
        0.0
    } else {
        keypoint_error(&mut out.model, &held)?
    };
    out.model
        .checkpoint(common.seed, &cfg.servo)
        .save(&run.path("servo.json"))?;
    run.write_json(
        "servo_eval.json",
        &ServoReport {
            train_examples: tr.len(),
            holdout_examples: held.len(),
            final_loss: out.final_loss,
            holdout_error_px: err,
        },
    )?;
    println!("held-out keypoint error {err:.3} px");
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

fn load_policy(path: Option<&Path>) -> Result<PolicyModel> {
    let p = path.ok_or_else(|| Error::Config("`model` checkpoint path is required".into()))?;
    PolicyModel::from_checkpoint(&Checkpoint::load(p)?)
}

fn eval(common: &Common, cfg: &ModelCmdConfig) -> Result<i32> {
    let mut model = load_policy(cfg.model.as_deref())?;
    let mut run = Run::start("eval", common)?;
    let ds = cfg.data.load(common.seed)?;
    let report = evaluate_report(&mut model, &ds.test)?;
    write_confusion_csv(&report, &run.path("confusion.csv"))?;
    run.write_json("eval.json", &report)?;
    println!(
        "{}: accuracy {:.3} (vertical {:.3}, angled {:.3})",
        report.mode, report.accuracy, report.vertical_accuracy, report.angled_accuracy
    );
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

fn parse_method(name: &str) -> Result<Method> {
    if name == "oracle" {
        Ok(Method::Oracle)
    } else {
        Ok(Method::Learned(name.parse()?))
    }
}

fn load_servo(path: Option<&Path>, trial: &TrialConfig) -> Result<Option<HeatmapNet>> {
    match (path, trial.servo) {
        (Some(p), _) => Ok(Some(HeatmapNet::from_checkpoint(&Checkpoint::load(p)?)?)),
        (None, ServoSetting::Learned) => Err(Error::Config("learned servo needs `servo_model`".into())),
        (None, _) => Ok(None),
    }
}

fn seeds_from(base: u64, n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::Config("`seeds` must be positive".into()));
    }
    Ok((0..n as u64).map(|i| base + i).collect())
}

fn run_plates(common: &Common, cfg: &RunPlatesConfig) -> Result<i32> {
    let method = parse_method(&cfg.method)?;
    let mut model = match method {
        Method::Learned(mode) => {
            let m = load_policy(cfg.model.as_deref())?;
            if m.mode != mode {
                return Err(Error::Mode(format!("checkpoint is {}, config asks for {mode}", m.mode)));
            }
            Some(m)
        }
        Method::Oracle => None,
    };
    let mut servo = load_servo(cfg.servo_model.as_deref(), &cfg.trial)?;
    let table = load_table(cfg.archetypes.as_deref())?;
    let specs = cfg.plates.clone().unwrap_or_else(PlateSpec::evaluation_plates);
    let seeds = seeds_from(common.seed, cfg.seeds)?;
    cfg.trial.validate()?;
    let mut run = Run::start("run-plates", common)?;
    let mut rows = Vec::new();
    for spec in &specs {
        for &seed in &seeds {
            let trial = TrialConfig { seed, ..cfg.trial };
            let mut policy = match model.as_mut() {
                Some(m) => Policy::Learned(m),
                None => Policy::Oracle,
            };
            let r = run_plate_experiment(spec, &table, &mut policy, &trial, servo.as_mut())?;
            rows.push(ComparisonRow {
                plate: spec.label.clone(),
                mode: method.name(),
                seed,
                metrics: r.metrics,
            });
        }
    }
    let cmp = Comparison { rows };
    cmp.write_csv(&run.path("metrics.csv"))?;
    let m = cmp.pooled(&method.name());
    println!(
        "{}: {}/{} ({:.3})",
        method.name(),
        m.items_acquired,
        m.total_attempts,
        m.success_rate()
    );
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

fn compare(common: &Common, cfg: &CompareConfig) -> Result<i32> {
    let methods: Vec<Method> = cfg.methods.iter().map(|m| parse_method(m)).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods to compare".into()));
    }
    let mut models = BTreeMap::new();
    for (name, path) in &cfg.models {
        let mode: PolicyMode = name.parse()?;
        let m = load_policy(Some(path))?;
        if m.mode != mode {
            return Err(Error::Mode(format!("{} holds a {} model", path.display(), m.mode)));
        }
        models.insert(mode, m);
    }
    let servo = load_servo(cfg.servo_model.as_deref(), &cfg.trial)?;
    let seeds = seeds_from(common.seed, cfg.seeds)?;
    cfg.trial.validate()?;
    let table = cfg.data.table()?;
    let mut run = Run::start("compare", common)?;
    let missing: Vec<PolicyMode> = methods
        .iter()
        .filter_map(|m| match m {
            Method::Learned(mode) if !models.contains_key(mode) => Some(*mode),
            _ => None,
        })
        .collect();
    if !missing.is_empty() {
        let ds = cfg.data.load(common.seed)?;
        for mode in missing {
            let mut t = train_policy(&ds.train, mode, &cfg.train, common.seed)?;
            if !ds.test.is_empty() {
                let cm = evaluate_confusion(&mut t.model, &ds.test)?;
                println!("{mode}: test accuracy {:.3}", cm.accuracy());
            }
            t.checkpoint().save(&run.path(&model_file(mode)))?;
            models.insert(mode, t.model);
        }
    }
    let specs = cfg.plates.clone().unwrap_or_else(PlateSpec::evaluation_plates);
    let cmp = compare_methods(&specs, &methods, &models, &seeds, &table, &cfg.trial, servo.as_ref())?;
    cmp.write_csv(&run.path("comparison.csv"))?;
    cmp.write_summary_csv(&run.path("summary.csv"))?;
    for mode in cmp.modes() {
        let m = cmp.pooled(&mode);
        println!(
            "{mode:12} {:5}/{:5}  {:.3}",
            m.items_acquired,
            m.total_attempts,
            m.success_rate()
        );
    }
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

fn sweep(common: &Common, cfg: &SweepCmdConfig) -> Result<i32> {
    let seeds = seeds_from(common.seed, cfg.seeds)?;
    let mut run = Run::start("sweep", common)?;
    let ds = cfg.data.load(common.seed)?;
    let rows = sample_efficiency_sweep(&ds.train, &ds.test, &cfg.fractions, &seeds, &cfg.train)?;
    write_sweep_csv(&rows, &run.path("sweep.csv"))?;
    for f in &cfg.fractions {
        let accs: Vec<f64> = rows
            .iter()
            .filter(|r| r.fraction == *f)
            .map(|r| r.overall_acc)
            .collect();
        println!(
            "fraction {f:.2}: mean accuracy {:.3}",
            accs.iter().sum::<f64>() / accs.len() as f64
        );
    }
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GradcheckRow {
    model: String,
    max_rel_error: f64,
    checked: usize,
    skipped: usize,
}

fn gradcheck(common: &Common, cfg: &GradcheckConfig) -> Result<i32> {
    use crate::perception::servo_model::ServoExample;
    use crate::tinynn::Tensor;
    use rand::Rng;

    let mut run = Run::start("gradcheck", common)?;
    let mut r = rng::stream(common.seed, &[rng::tag::PROBE]);
    let img = Tensor::uniform(&[3, 32, 32], 1.0, &mut r);
    let trace: Vec<f64> = (0..crate::simworld::TRACE_LEN).map(|_| r.gen_range(0.0..3.0)).collect();
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let mut m = PolicyModel::seeded(mode, common.seed);
        let rep = gradient_check_report(&mut m, |m, bw| m.loss(Some(&img), Some(&trace), 1, bw))?;
        rows.push(GradcheckRow {
            model: format!("policy_{}", mode.name()),
            max_rel_error: rep.max_rel_error,
            checked: rep.checked,
            skipped: rep.skipped,
        });
    }
    if cfg.heatmap {
        let mut net = HeatmapNet::new(&mut rng::stream(common.seed, &[rng::tag::INIT]));
        let ex = ServoExample::random(16, &mut r);
        let rep = gradient_check_report(&mut net, |n, bw| n.loss(&ex, bw))?;
        rows.push(GradcheckRow {
            model: "heatmap".into(),
            max_rel_error: rep.max_rel_error,
            checked: rep.checked,
            skipped: rep.skipped,
        });
    }
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    for row in &rows {
        println!(
            "{:24} max relative error {:.3e} ({} checked)",
            row.model, row.max_rel_error, row.checked
        );
    }
    println!("max relative error {worst:.3e}");
    run.write_json("gradcheck.json", &rows)?;
    run.finish(cfg)?;
    Ok(if worst < cfg.tolerance { EXIT_OK } else { EXIT_RUNTIME })
}

fn embeddings(common: &Common, cfg: &ModelCmdConfig) -> Result<i32> {
    let mut model = load_policy(cfg.model.as_deref())?;
    if model.mode != PolicyMode::Multimodal {
        return Err(Error::Mode(format!(
            "embeddings need a multimodal model, got {}",
            model.mode
        )));
    }
    let mut run = Run::start("export-embeddings", common)?;
    let ds = cfg.data.load(common.seed)?;
    let all: Vec<Example> = ds.test.iter().chain(ds.train.iter()).cloned().collect();
    let rows = export_embeddings(&mut model, &all)?;
    write_embeddings_csv(&rows, &run.path("embeddings.csv"))?;
    println!("{} embeddings", rows.len());
    run.finish(cfg)?;
    Ok(EXIT_OK)
}

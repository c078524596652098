//! File-driven pipeline: generate correlator samples, encode them as
//! images, train and evaluate the classifier, and verify ensembles.
//!
//! Every command takes an [`ExperimentConfig`], reads and writes the binary
//! formats of the other modules, and leaves a JSON [`RunManifest`] next to
//! its main output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cnn::{evaluate, read_checkpoint, train, write_checkpoint, CnnConfig, CnnModel, Precision, TrainReport};
use crate::correlators::{catalog, sample_matrix, PairSharing, SampleFile, SampleMatrix};
use crate::ensembles::{
    calibrate_brickwork_depth, default_brickwork_depth, estimate_frame_potential, first_moment_twirl_error,
    pauli_frame_potential_exact, second_moment_twirl_error, BrickworkCalibration, EnsembleKind, EnsembleSpec,
    Estimate, MAX_SECOND_MOMENT_QUBITS,
};
use crate::imaging::{encode_entries, split_dataset, Dataset, DatasetMetadata};
use crate::seed::{derive, rng_from, stage, SeededRng};
use crate::{Error, Result};

/// Second-moment target used when calibrating brickwork depth.
pub const CALIBRATION_EPSILON: f64 = 1e-3;

/// How the depth of a `brickwork2` ensemble without an explicit
/// `brickwork2:<depth>` suffix is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DepthChoice {
    /// `4 N` layers.
    #[default]
    Default,
    /// Measured with [`calibrate_brickwork_depth`].
    Calibrate,
    Fixed(usize),
}

impl FromStr for DepthChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" | "auto" => Ok(DepthChoice::Default),
            "calibrate" => Ok(DepthChoice::Calibrate),
            n => n
                .parse()
                .ok()
                .filter(|&d| d >= 1)
                .map(DepthChoice::Fixed)
                .ok_or_else(|| Error::Config(format!("brickwork_depth must be default, calibrate or a depth >= 1, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for DepthChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DepthChoice::Default => f.write_str("default"),
            DepthChoice::Calibrate => f.write_str("calibrate"),
            DepthChoice::Fixed(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    pub correlator: String,
    /// Class 0.
    pub ensemble_a: String,
    /// Class 1.
    pub ensemble_b: String,
    pub images_per_class: usize,
    pub batch_m: usize,
    pub train_count: usize,
    pub seed: u64,
    pub brickwork_depth: DepthChoice,
    pub pair_sharing: PairSharing,
    pub threads: usize,
    pub cnn: CnnConfig,
    pub samples_path: PathBuf,
    pub images_path: PathBuf,
    pub model_path: PathBuf,
    pub metrics_path: PathBuf,
    pub validation_path: PathBuf,
    pub eval_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            n_qubits: 10,
            correlator: "xyxy".into(),
            ensemble_a: "pauli1".into(),
            ensemble_b: "brickwork2".into(),
            images_per_class: 3125,
            batch_m: 5,
            train_count: 5000,
            seed: 0,
            brickwork_depth: DepthChoice::Default,
            pair_sharing: PairSharing::Shared,
            threads: 1,
            cnn: CnnConfig::default(),
            samples_path: PathBuf::new(),
            images_path: PathBuf::new(),
            model_path: PathBuf::new(),
            metrics_path: PathBuf::new(),
            validation_path: PathBuf::new(),
            eval_path: PathBuf::new(),
        };
        cfg.set_output_dir(Path::new("run"));
        cfg
    }
}

/// Keys accepted in config files and as command-line overrides.
pub const CONFIG_KEYS: &[&str] = &[
    "n_qubits",
    "correlator",
    "ensemble_a",
    "ensemble_b",
    "images_per_class",
    "batch_m",
    "train_count",
    "seed",
    "brickwork_depth",
    "pair_sharing",
    "threads",
    "conv1_filters",
    "conv1_size",
    "conv2_filters",
    "conv2_size",
    "fc_units",
    "classes",
    "learning_rate",
    "batch_size",
    "epochs",
    "precision",
    "samples_path",
    "images_path",
    "model_path",
    "metrics_path",
    "validation_path",
    "eval_path",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for {key}")))
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", number + 1)));
            };
            let key = key.trim();
            if let Some(previous) = seen.insert(key.to_string(), number + 1) {
                return Err(Error::Config(format!("line {}: {key} already set on line {previous}", number + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", number + 1, message(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_qubits" => self.n_qubits = parse_value(key, value)?,
            "correlator" => self.correlator = value.to_string(),
            "ensemble_a" => self.ensemble_a = value.to_string(),
            "ensemble_b" => self.ensemble_b = value.to_string(),
            "images_per_class" => self.images_per_class = parse_value(key, value)?,
            "batch_m" => self.batch_m = parse_value(key, value)?,
            "train_count" => self.train_count = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "brickwork_depth" => self.brickwork_depth = value.parse()?,
            "pair_sharing" => {
                self.pair_sharing = match value {
                    "shared" => PairSharing::Shared,
                    "per_pixel" => PairSharing::PerPixel,
                    _ => return Err(Error::Config(format!("pair_sharing must be shared or per_pixel, got `{value}`"))),
                }
            }
            "threads" => self.threads = parse_value(key, value)?,
            "conv1_filters" => self.cnn.conv1_filters = parse_value(key, value)?,
            "conv1_size" => self.cnn.conv1_size = parse_value(key, value)?,
            "conv2_filters" => self.cnn.conv2_filters = parse_value(key, value)?,
            "conv2_size" => self.cnn.conv2_size = parse_value(key, value)?,
            "fc_units" => self.cnn.fc_units = parse_value(key, value)?,
            "classes" => self.cnn.classes = parse_value(key, value)?,
            "learning_rate" => self.cnn.learning_rate = parse_value(key, value)?,
            "batch_size" => self.cnn.batch_size = parse_value(key, value)?,
            "epochs" => self.cnn.epochs = parse_value(key, value)?,
            "precision" => self.cnn.precision = value.parse().map_err(|e| Error::Config(message(&e)))?,
            "samples_path" => self.samples_path = value.into(),
            "images_path" => self.images_path = value.into(),
            "model_path" => self.model_path = value.into(),
            "metrics_path" => self.metrics_path = value.into(),
            "validation_path" => self.validation_path = value.into(),
            "eval_path" => self.eval_path = value.into(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Places every output file under `dir` with its default name.
    pub fn set_output_dir(&mut self, dir: &Path) {
        self.samples_path = dir.join("samples.qcsm");
        self.images_path = dir.join("images.qcim");
        self.model_path = dir.join("model.qcnn");
        self.metrics_path = dir.join("train.csv");
        self.validation_path = dir.join("validation.qcim");
        self.eval_path = dir.join("eval.csv");
    }

    /// Canonical `key = value` form, accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            writeln!(out, "{key} = {value}").expect("string write");
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let c = &self.cnn;
        let path = |p: &PathBuf| p.display().to_string();
        vec![
            ("n_qubits", self.n_qubits.to_string()),
            ("correlator", self.correlator.clone()),
            ("ensemble_a", self.ensemble_a.clone()),
            ("ensemble_b", self.ensemble_b.clone()),
            ("images_per_class", self.images_per_class.to_string()),
            ("batch_m", self.batch_m.to_string()),
            ("train_count", self.train_count.to_string()),
            ("seed", self.seed.to_string()),
            ("brickwork_depth", self.brickwork_depth.to_string()),
            (
                "pair_sharing",
                match self.pair_sharing {
                    PairSharing::Shared => "shared".into(),
                    PairSharing::PerPixel => "per_pixel".into(),
                },
            ),
            ("threads", self.threads.to_string()),
            ("conv1_filters", c.conv1_filters.to_string()),
            ("conv1_size", c.conv1_size.to_string()),
            ("conv2_filters", c.conv2_filters.to_string()),
            ("conv2_size", c.conv2_size.to_string()),
            ("fc_units", c.fc_units.to_string()),
            ("classes", c.classes.to_string()),
            ("learning_rate", c.learning_rate.to_string()),
            ("batch_size", c.batch_size.to_string()),
            ("epochs", c.epochs.to_string()),
            ("precision", c.precision.to_string()),
            ("samples_path", path(&self.samples_path)),
            ("images_path", path(&self.images_path)),
            ("model_path", path(&self.model_path)),
            ("metrics_path", path(&self.metrics_path)),
            ("validation_path", path(&self.validation_path)),
            ("eval_path", path(&self.eval_path)),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Config("n_qubits must be at least 1".into()));
        }
        catalog(&self.correlator)?;
        self.ensemble_a.parse::<EnsembleKind>()?;
        self.ensemble_b.parse::<EnsembleKind>()?;
        if self.images_per_class == 0 {
            return Err(Error::Config("images_per_class must be at least 1".into()));
        }
        if self.batch_m == 0 {
            return Err(Error::Config("batch_m must be at least 1".into()));
        }
        if self.train_count == 0 || self.train_count >= 2 * self.images_per_class {
            return Err(Error::Config(format!(
                "train_count {} must be at least 1 and below the {} generated images",
                self.train_count,
                2 * self.images_per_class
            )));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.cnn.classes != 2 {
            return Err(Error::Config("the classifier separates exactly 2 classes".into()));
        }
        self.cnn.validate()
    }

    /// Ensemble for `name` on this register, resolving brickwork depth.
    pub fn ensemble(&self, name: &str) -> Result<(EnsembleSpec, Option<BrickworkCalibration>)> {
        resolve_ensemble(name, self.n_qubits, self.brickwork_depth, self.seed)
    }

    pub fn class_names(&self) -> [String; 2] {
        [self.ensemble_a.clone(), self.ensemble_b.clone()]
    }

    /// Seed of image `index` of class `class`.
    pub fn image_seed(&self, class: usize, index: usize) -> u64 {
        derive(self.seed, &[stage::GENERATE, class as u64, index as u64])
    }
}

fn message(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Argument(m) | Error::Lookup(m) => m.clone(),
        other => other.to_string(),
    }
}

fn resolve_ensemble(
    name: &str,
    n_qubits: usize,
    depth: DepthChoice,
    seed: u64,
) -> Result<(EnsembleSpec, Option<BrickworkCalibration>)> {
    let mut kind: EnsembleKind = name.parse()?;
    let mut calibration = None;
    if let EnsembleKind::Brickwork2Design { depth: 0, epsilon_target } = kind {
        let resolved = match depth {
            DepthChoice::Default => default_brickwork_depth(n_qubits),
            DepthChoice::Fixed(d) => d,
            DepthChoice::Calibrate => {
                let mut rng = rng_from(derive(seed, &[stage::CALIBRATE, n_qubits as u64]));
                let c = calibrate_brickwork_depth(n_qubits, CALIBRATION_EPSILON, &mut rng)?;
                let d = c.depth;
                calibration = Some(c);
                d
            }
        };
        kind = EnsembleKind::Brickwork2Design { depth: resolved, epsilon_target };
    }
    Ok((EnsembleSpec::new(kind, n_qubits)?, calibration))
}

/// Record of one command run, written as JSON beside its output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, String>,
    /// File path → SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").expect("string write");
        s
    })
}

impl RunManifest {
    fn start(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            seeds: BTreeMap::from([("master".to_string(), cfg.seed.to_string())]),
            files: BTreeMap::new(),
            notes: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    fn record_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.files.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    fn finish(mut self, output: &Path) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = Self::path_for(output);
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Re-hashes every listed file; returns the paths whose digest changed.
    pub fn stale_files(manifest_path: &Path) -> Result<Vec<String>> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Format { offset: 0, reason: e.to_string() })?;
        let mut stale = Vec::new();
        if let Some(files) = value.get("files").and_then(|f| f.as_object()) {
            for (path, digest) in files {
                let current = fs::read(path).map(|b| sha256_hex(&b)).unwrap_or_default();
                if Some(current.as_str()) != digest.as_str() {
                    stale.push(path.clone());
                }
            }
        }
        Ok(stale)
    }
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(job))
}

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub records: usize,
    pub ensembles: [EnsembleSpec; 2],
    pub calibrations: Vec<BrickworkCalibration>,
    pub manifest: PathBuf,
    pub seconds: f64,
}

/// Draws `images_per_class` sample matrices for each class and writes them
/// to `samples_path`, class 0 first. Image `k` of class `c` is seeded by
/// `derive(seed, [GENERATE, c, k])`, so any record can be regenerated alone.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let mut manifest = RunManifest::start("generate", cfg);
    let spec = catalog(&cfg.correlator)?;
    let (ens_a, cal_a) = cfg.ensemble(&cfg.ensemble_a)?;
    let (ens_b, cal_b) = cfg.ensemble(&cfg.ensemble_b)?;
    let calibrations: Vec<_> = cal_a.into_iter().chain(cal_b).collect();
    for c in &calibrations {
        manifest.notes.insert(format!("brickwork_depth_n{}", c.requested_qubits), format!("{} ({})", c.depth, c.rule()));
    }
    manifest
        .seeds
        .insert("image".into(), "derive(master, [1, class, index])".into());

    let jobs: Vec<(usize, usize)> = (0..2)
        .flat_map(|class| (0..cfg.images_per_class).map(move |index| (class, index)))
        .collect();
    let ensembles = [ens_a, ens_b];
    let draw = |&(class, index): &(usize, usize)| -> Result<SampleMatrix> {
        sample_matrix(&spec, &ensembles[class], cfg.batch_m, cfg.image_seed(class, index), cfg.pair_sharing)
    };
    let matrices: Vec<Result<SampleMatrix>> = with_threads(cfg.threads, || {
        if cfg.threads <= 1 {
            jobs.iter().map(draw).collect()
        } else {
            jobs.par_iter().map(draw).collect()
        }
    })?;

    let mut file = SampleFile::new(cfg.n_qubits, &spec, cfg.batch_m)?;
    for ((class, _), matrix) in jobs.iter().zip(matrices) {
        file.push(*class as u8, &matrix?)?;
    }
    file.write(&cfg.samples_path)?;
    manifest.record_file(&cfg.samples_path)?;
    let manifest = manifest.finish(&cfg.samples_path)?;
    Ok(GenerateSummary {
        records: file.records.len(),
        ensembles,
        calibrations,
        manifest,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Class names recorded by `generate` for a sample file, if its manifest
/// is present.
fn generated_class_names(samples: &Path) -> Option<[String; 2]> {
    let text = fs::read_to_string(RunManifest::path_for(samples)).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let config = value.get("config")?;
    let name = |key: &str| config.get(key).and_then(|v| v.as_str()).map(str::to_string);
    Some([name("ensemble_a")?, name("ensemble_b")?])
}

/// Encodes every record of `samples_path` as an image in `images_path`.
/// Class names come from the generate manifest when available.
pub fn cmd_encode(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut manifest = RunManifest::start("encode", cfg);
    let samples = SampleFile::read(&cfg.samples_path)?;
    let n = samples.n_qubits as usize;
    let m = samples.batch_m as usize;
    let images = samples
        .records
        .iter()
        .map(|r| encode_entries(n, &r.entries, m, r.label))
        .collect::<Result<Vec<_>>>()?;
    let metadata = DatasetMetadata {
        correlator: samples.correlator()?.name,
        class_names: generated_class_names(&cfg.samples_path).unwrap_or_else(|| cfg.class_names()),
        n_qubits: n,
        batch_m: m,
        seed: cfg.seed,
    };
    let dataset = Dataset::new(images, metadata)?;
    dataset.write(&cfg.images_path)?;
    manifest.record_file(&cfg.samples_path)?;
    manifest.record_file(&cfg.images_path)?;
    manifest.finish(&cfg.images_path)?;
    Ok(dataset)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub train_images: usize,
    pub validation_images: usize,
}

/// Splits `images_path` into `train_count` training images and a validation
/// remainder, trains, and writes the checkpoint, the per-epoch CSV and the
/// validation split.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.cnn.validate()?;
    let mut manifest = RunManifest::start("train", cfg);
    let dataset = Dataset::read(&cfg.images_path)?;
    dataset.require_both_classes()?;
    let split_seed = derive(cfg.seed, &[stage::SPLIT]);
    let train_seed = derive(cfg.seed, &[stage::TRAIN]);
    manifest.seeds.insert("split".into(), split_seed.to_string());
    manifest.seeds.insert("train".into(), train_seed.to_string());
    let (train_set, val_set) = split_dataset(&dataset, cfg.train_count, &mut rng_from(split_seed))?;
    train_set.require_both_classes()?;

    let cnn = CnnConfig { seed: train_seed, ..cfg.cnn.clone() };
    let mut rng = rng_from(train_seed);
    let (model, report): (CnnModel<f32>, TrainReport) = match cnn.precision {
        Precision::F32 => train::<f32, _>(&train_set, &val_set, &cnn, &mut rng)?,
        Precision::F64 => {
            let (m, r) = train::<f64, _>(&train_set, &val_set, &cnn, &mut rng)?;
            (m.cast(), r)
        }
    };
    write_checkpoint(&model, &cfg.model_path)?;
    write_text(&cfg.metrics_path, &report.to_csv())?;
    val_set.write(&cfg.validation_path)?;
    if let Some(acc) = report.headline_accuracy() {
        manifest.notes.insert("headline_val_acc".into(), format!("{acc:.6}"));
    }
    manifest.notes.insert("train_seconds".into(), format!("{:.3}", report.wall_seconds));
    for path in [&cfg.images_path, &cfg.model_path, &cfg.metrics_path, &cfg.validation_path] {
        manifest.record_file(path)?;
    }
    manifest.finish(&cfg.model_path)?;
    Ok(TrainOutcome { report, train_images: train_set.len(), validation_images: val_set.len() })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Accuracy of the checkpoint on a dataset, appended as a row of
/// `eval_path` (`checkpoint,dataset,images,accuracy`).
pub fn cmd_eval(checkpoint: &Path, dataset: &Path, eval_path: &Path) -> Result<f64> {
    let model: CnnModel<f32> = read_checkpoint(checkpoint)?;
    let data = Dataset::read(dataset)?;
    let accuracy = evaluate(&model, &data)?;
    if let Some(parent) = eval_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let fresh = !eval_path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(eval_path)
        .map_err(|e| Error::io(eval_path, e))?;
    let mut row = String::new();
    if fresh {
        row.push_str("checkpoint,dataset,images,accuracy\n");
    }
    writeln!(row, "{},{},{},{accuracy:.6}", checkpoint.display(), dataset.display(), data.len()).expect("string write");
    file.write_all(row.as_bytes()).map_err(|e| Error::io(eval_path, e))?;
    Ok(accuracy)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRequest {
    pub ensemble: String,
    pub n_qubits: usize,
    pub trials: usize,
    pub seed: u64,
    /// Exact enumeration of frame potentials (Pauli ensemble only).
    pub exact: bool,
    pub brickwork_depth: DepthChoice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRow {
    pub metric: &'static str,
    pub value: f64,
    /// `None` for distances of a single Monte-Carlo average.
    pub stderr: Option<f64>,
}

/// Twirl errors and frame potentials `F^(1)`, `F^(2)` of one ensemble.
pub fn verify_ensemble(req: &VerifyRequest) -> Result<Vec<VerifyRow>> {
    if req.trials < 2 {
        return Err(Error::Argument("verify needs at least 2 trials".into()));
    }
    if req.n_qubits > MAX_SECOND_MOMENT_QUBITS {
        return Err(Error::Capacity(format!(
            "verify runs the second-moment twirl, limited to {MAX_SECOND_MOMENT_QUBITS} qubits (requested {})",
            req.n_qubits
        )));
    }
    let (spec, _) = resolve_ensemble(&req.ensemble, req.n_qubits, req.brickwork_depth, req.seed)?;
    if req.exact && !matches!(spec.kind, EnsembleKind::Pauli1Design) {
        return Err(Error::Argument(format!("exact mode is only available for pauli1, not {}", spec.kind.name())));
    }
    let mut rng = rng_from(derive(req.seed, &[stage::VERIFY]));
    let first = first_moment_twirl_error(&spec, req.trials, &mut rng)?;
    let second = second_moment_twirl_error(&spec, req.trials, &mut rng)?;
    let frame = |k: u32, rng: &mut SeededRng| -> Result<Estimate> {
        if req.exact {
            pauli_frame_potential_exact(req.n_qubits, k).map(Estimate::exact)
        } else {
            estimate_frame_potential(&spec, k, req.trials, rng)
        }
    };
    let f1 = frame(1, &mut rng)?;
    let f2 = frame(2, &mut rng)?;
    Ok(vec![
        VerifyRow { metric: "first_moment_twirl_error", value: first, stderr: None },
        VerifyRow { metric: "second_moment_twirl_error", value: second, stderr: None },
        VerifyRow { metric: "frame_potential_1", value: f1.mean, stderr: Some(f1.stderr) },
        VerifyRow { metric: "frame_potential_2", value: f2.mean, stderr: Some(f2.stderr) },
    ])
}

pub fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut out = String::from("metric,value,stderr\n");
    for r in rows {
        let stderr = r.stderr.map(|s| format!("{s:.6e}")).unwrap_or_default();
        writeln!(out, "{},{:.10},{stderr}", r.metric, r.value).expect("string write");
    }
    out
}

/// Runs [`verify_ensemble`] and writes its CSV to `out`.
pub fn cmd_verify(req: &VerifyRequest, out: &Path) -> Result<Vec<VerifyRow>> {
    let rows = verify_ensemble(req)?;
    write_text(out, &verify_csv(&rows))?;
    Ok(rows)
}

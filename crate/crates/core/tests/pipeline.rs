use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scramblenet::cnn::{read_checkpoint, CnnModel};
use scramblenet::correlators::SampleFile;
use scramblenet::experiment::{
    cmd_encode, cmd_eval, cmd_generate, cmd_train, verify_ensemble, DepthChoice, ExperimentConfig, RunManifest,
    VerifyRequest,
};
use scramblenet::imaging::Dataset;
use scramblenet::Error;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_qubits: 4,
        correlator: "xxyy".into(),
        ensemble_a: "pauli1".into(),
        ensemble_b: "haar".into(),
        images_per_class: 12,
        train_count: 16,
        seed: 21,
        ..ExperimentConfig::default()
    };
    cfg.cnn.conv1_filters = 4;
    cfg.cnn.conv2_filters = 4;
    cfg.cnn.fc_units = 16;
    cfg.cnn.batch_size = 8;
    cfg.cnn.epochs = 3;
    cfg.set_output_dir(dir);
    cfg
}

fn run_all(cfg: &ExperimentConfig) {
    cmd_generate(cfg).unwrap();
    cmd_encode(cfg).unwrap();
    cmd_train(cfg).unwrap();
}

#[test]
fn pipeline_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = small_config(a.path());
    let cfg_b = small_config(b.path());
    run_all(&cfg_a);
    run_all(&cfg_b);
    for name in ["samples.qcsm", "images.qcim", "model.qcnn", "train.csv", "validation.qcim"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn parallel_generation_matches_serial() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let serial = small_config(a.path());
    let parallel = ExperimentConfig { threads: 3, ..small_config(b.path()) };
    cmd_generate(&serial).unwrap();
    cmd_generate(&parallel).unwrap();
    assert_eq!(fs::read(&serial.samples_path).unwrap(), fs::read(&parallel.samples_path).unwrap());
}

#[test]
fn generate_counts_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { images_per_class: 1, train_count: 1, ..small_config(dir.path()) };
    let summary = cmd_generate(&cfg).unwrap();
    assert_eq!(summary.records, 2);
    let file = SampleFile::read(&cfg.samples_path).unwrap();
    let labels: Vec<u8> = file.records.iter().map(|r| r.label).collect();
    assert_eq!(labels, vec![0, 1]);

    let dataset = cmd_encode(&cfg).unwrap();
    assert_eq!(dataset.len(), 2);
    assert_eq!(dataset.metadata.class_names, ["pauli1".to_string(), "haar".to_string()]);
    assert_eq!(dataset.image_dims(), Some((4, 4)));
}

#[test]
fn any_record_regenerates_alone() {
    use scramblenet::correlators::{catalog, sample_matrix};
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg).unwrap();
    let file = SampleFile::read(&cfg.samples_path).unwrap();
    let (ens, _) = cfg.ensemble(&cfg.ensemble_b).unwrap();
    let spec = catalog(&cfg.correlator).unwrap();
    let alone = sample_matrix(&spec, &ens, cfg.batch_m, cfg.image_seed(1, 7), cfg.pair_sharing).unwrap();
    assert_eq!(file.records[cfg.images_per_class + 7].entries, alone.entries);
}

#[test]
fn reencoding_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg).unwrap();
    cmd_encode(&cfg).unwrap();
    let first = fs::read(&cfg.images_path).unwrap();
    cmd_encode(&cfg).unwrap();
    assert_eq!(fs::read(&cfg.images_path).unwrap(), first);
}

#[test]
fn truncated_samples_report_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg).unwrap();
    let bytes = fs::read(&cfg.samples_path).unwrap();
    fs::write(&cfg.samples_path, &bytes[..200]).unwrap();
    match cmd_encode(&cfg) {
        Err(Error::Format { offset, .. }) => assert!(offset <= 200, "offset {offset}"),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn eval_reproduces_final_validation_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg).unwrap();
    cmd_encode(&cfg).unwrap();
    let outcome = cmd_train(&cfg).unwrap();
    assert_eq!(outcome.train_images, 16);
    assert_eq!(outcome.validation_images, 8);
    let acc = cmd_eval(&cfg.model_path, &cfg.validation_path, &cfg.eval_path).unwrap();
    assert!((acc - outcome.report.final_val_acc().unwrap()).abs() < 1e-6);

    let csv = fs::read_to_string(&cfg.metrics_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,train_acc,val_acc"));
    assert_eq!(lines.count(), cfg.cnn.epochs);

    cmd_eval(&cfg.model_path, &cfg.validation_path, &cfg.eval_path).unwrap();
    let eval = fs::read_to_string(&cfg.eval_path).unwrap();
    assert_eq!(eval.lines().count(), 3);
}

#[test]
fn f64_training_writes_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.cnn.precision = scramblenet::cnn::Precision::F64;
    run_all(&cfg);
    let model: CnnModel<f32> = read_checkpoint(&cfg.model_path).unwrap();
    assert_eq!(model.input_shape(), [4, 4, 3]);
}

#[test]
fn train_rejects_single_class_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { ensemble_b: "pauli1".into(), ..small_config(dir.path()) };
    cmd_generate(&cfg).unwrap();
    cmd_encode(&cfg).unwrap();
    let mut data = Dataset::read(&cfg.images_path).unwrap();
    data.images.retain(|im| im.label == 0);
    data.write(&cfg.images_path).unwrap();
    let cfg = ExperimentConfig { train_count: 6, ..cfg };
    assert!(matches!(cmd_train(&cfg), Err(Error::Validation(_))));

    let missing = small_config(&dir.path().join("absent"));
    match cmd_train(&missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing.images_path),
        other => panic!("expected an i/o error, got {other:?}"),
    }
}

#[test]
fn eval_rejects_mismatched_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_all(&cfg);
    let other_dir = dir.path().join("n5");
    let other = ExperimentConfig { n_qubits: 5, ..small_config(&other_dir) };
    cmd_generate(&other).unwrap();
    cmd_encode(&other).unwrap();
    assert!(matches!(cmd_eval(&cfg.model_path, &other.images_path, &cfg.eval_path), Err(Error::Shape(_))));
}

#[test]
fn untrained_models_sit_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let mut accs = Vec::new();
    for seed in 0..5 {
        let mut cfg = small_config(&dir.path().join(seed.to_string()));
        cfg.seed = seed;
        cfg.images_per_class = 20;
        cfg.train_count = 20;
        cfg.cnn.epochs = 0;
        run_all(&cfg);
        accs.push(cmd_eval(&cfg.model_path, &cfg.images_path, &cfg.eval_path).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((0.35..=0.65).contains(&mean), "{accs:?}");
}

#[test]
fn manifests_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_all(&cfg);
    for output in [&cfg.samples_path, &cfg.images_path, &cfg.model_path] {
        let manifest = RunManifest::path_for(output);
        assert!(manifest.exists());
        assert!(RunManifest::stale_files(&manifest).unwrap().is_empty());
    }
    fs::write(&cfg.metrics_path, "tampered").unwrap();
    let stale = RunManifest::stale_files(&RunManifest::path_for(&cfg.model_path)).unwrap();
    assert_eq!(stale, vec![cfg.metrics_path.display().to_string()]);
}

#[test]
fn verify_values() {
    let request = |ensemble: &str, n_qubits, exact| VerifyRequest {
        ensemble: ensemble.into(),
        n_qubits,
        trials: 2000,
        seed: 5,
        exact,
        brickwork_depth: DepthChoice::Default,
    };
    let haar = verify_ensemble(&request("haar", 2, false)).unwrap();
    let f2 = &haar[3];
    assert_eq!(f2.metric, "frame_potential_2");
    assert!((f2.value - 2.0).abs() < 0.3, "{f2:?}");

    let pauli = verify_ensemble(&request("pauli1", 2, true)).unwrap();
    assert_eq!(pauli[3].value, 16.0);
    assert_eq!(pauli[3].stderr, Some(0.0));

    assert!(matches!(verify_ensemble(&request("haar", 9, false)), Err(Error::Capacity(_))));
    assert!(matches!(verify_ensemble(&request("haar", 2, true)), Err(Error::Argument(_))));
}

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scramblenet")).current_dir(dir).args(args).output().unwrap()
}

#[test]
fn cli_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = "n_qubits = 3\ncorrelator = xy2pt\nensemble_b = haar\nimages_per_class = 6\ntrain_count = 8\n\
                  conv1_filters = 2\nconv2_filters = 2\nfc_units = 4\nepochs = 2\nbatch_size = 4\nconv2_size = 2\n";
    fs::write(dir.path().join("exp.cfg"), config).unwrap();
    for sub in ["generate", "encode", "train"] {
        let out = cli(dir.path(), &[sub, "--config", "exp.cfg", "--out", "run", "--seed", "9"]);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = cli(dir.path(), &["eval", "--config", "exp.cfg", "--out", "run"]);
    assert!(out.status.success());
    let printed = String::from_utf8(out.stdout).unwrap();
    let value = printed.trim();
    assert_eq!(value.len(), 6, "accuracy printed with 4 decimals: {value}");
    value.parse::<f64>().unwrap();

    let out = cli(dir.path(), &["verify", "--ensemble", "pauli1", "--n-qubits", "2", "--exact", "--csv", "v.csv"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert!(csv.starts_with("metric,value,stderr\n"));
    assert!(csv.contains("frame_potential_2,16.0000000000,"));
}

#[test]
fn cli_errors_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["generate", "--config", "bad.cfg"], "kind=config"),
        (&["verify", "--ensemble", "haar", "--n-qubits", "9"], "kind=capacity"),
        (&["train", "--out", "missing"], "kind=io"),
        (&["generate", "--no-such-flag"], "kind=usage"),
    ];
    for (args, kind) in cases {
        let out = cli(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error ") && err.contains(kind), "{err}");
    }
}

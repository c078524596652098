//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.
//!
//! The full-scale classification run (criterion 7) takes many hours on a
//! single core and only runs when `SCRAMBLENET_FULL_SCALE=1` is set.

use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use scramblenet::cnn::{CnnConfig, CnnModel, Layer, Tensor, TrainReport};
use scramblenet::correlators::{catalog, ensemble_average, sample_matrix, SampleFile};
use scramblenet::ensembles::{
    calibrate_brickwork_depth, estimate_frame_potential, first_moment_twirl_error, pauli_frame_potential_exact,
    second_moment_twirl_error, EnsembleKind, EnsembleSpec,
};
use scramblenet::experiment::{cmd_encode, cmd_generate, cmd_train, DepthChoice, ExperimentConfig};
use scramblenet::seed::rng_from;
use scramblenet::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Criterion 1: design order at N = 2 with 5000 trials.
const C1_TRIALS: usize = 5000;
const C1_DESIGN_MAX: f64 = 0.05;
const C1_PAULI_SECOND_MIN: f64 = 0.1;

fn criterion_1() -> Result<Outcome> {
    let n = 2;
    let mut rng = rng_from(101);
    let depth = calibrate_brickwork_depth(n, 1e-3, &mut rng)?.depth;
    let ensembles = [EnsembleSpec::pauli(n)?, EnsembleSpec::brickwork(n, depth)?, EnsembleSpec::haar(n)?];
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in &ensembles {
        let first = first_moment_twirl_error(spec, C1_TRIALS, &mut rng)?;
        let second = second_moment_twirl_error(spec, C1_TRIALS, &mut rng)?;
        let second_ok = match spec.kind {
            EnsembleKind::Pauli1Design => second >= C1_PAULI_SECOND_MIN,
            _ => second <= C1_DESIGN_MAX,
        };
        pass &= first <= C1_DESIGN_MAX && second_ok;
        parts.push(format!("{} first={first:.4} second={second:.4}", spec.kind.name()));
    }
    Ok(outcome(pass, format!("brickwork depth {depth}; {}", parts.join("; "))))
}

// Criterion 2: frame potentials.
const C2_PAIRS: usize = 10_000;

fn criterion_2() -> Result<Outcome> {
    let mut rng = rng_from(102);
    let haar = EnsembleSpec::haar(3)?;
    let f1 = estimate_frame_potential(&haar, 1, C2_PAIRS, &mut rng)?;
    let f2 = estimate_frame_potential(&haar, 2, C2_PAIRS, &mut rng)?;
    let pauli = pauli_frame_potential_exact(2, 2)?;
    let pass = (f1.mean - 1.0).abs() <= 0.1 && (f2.mean - 2.0).abs() <= 0.5 && pauli == 16.0;
    Ok(outcome(
        pass,
        format!(
            "haar N=3 F1={:.4}±{:.4} F2={:.4}±{:.4}; pauli N=2 exact F2={pauli}",
            f1.mean, f1.stderr, f2.mean, f2.stderr
        ),
    ))
}

fn ensembles_n6() -> Result<[EnsembleSpec; 3]> {
    Ok([EnsembleSpec::pauli(6)?, EnsembleSpec::brickwork(6, 24)?, EnsembleSpec::haar(6)?])
}

// Criteria 3 and 4: ensemble averages at N = 6, 2000 trials, sites i != j.
const C34_TRIALS: usize = 2000;
const C34_SITES: (usize, usize) = (1, 4);

fn criterion_3() -> Result<Outcome> {
    let mut rng = rng_from(103);
    let spec = catalog("xy2pt")?;
    let mut pass = true;
    let mut parts = Vec::new();
    for ens in ensembles_n6()? {
        let est = ensemble_average(&spec, &ens, C34_SITES.0, C34_SITES.1, C34_TRIALS, &mut rng)?;
        let ok = est.mean.norm() <= 3.0 * est.stderr();
        pass &= ok;
        parts.push(format!("{} |mean|={:.4} 3se={:.4}", ens.kind.name(), est.mean.norm(), 3.0 * est.stderr()));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_4() -> Result<Outcome> {
    let mut rng = rng_from(104);
    let spec = catalog("xyxy")?;
    let mut pass = true;
    let mut parts = Vec::new();
    for ens in ensembles_n6()? {
        let est = ensemble_average(&spec, &ens, C34_SITES.0, C34_SITES.1, C34_TRIALS, &mut rng)?;
        let ok = match ens.kind {
            EnsembleKind::Pauli1Design => (est.mean - 1.0).norm() < 1e-12,
            _ => est.mean.norm() <= 0.05,
        };
        pass &= ok;
        parts.push(format!("{} mean={:.4}{:+.4}i", ens.kind.name(), est.mean.re, est.mean.im));
    }
    Ok(outcome(pass, parts.join("; ")))
}

// Criterion 5: analytic gradients against central differences, 64-bit.
const C5_STEP: f64 = 1e-5;
const C5_PROBES_PER_TENSOR: usize = 25;
const C5_MAX_REL: f64 = 1e-4;
/// Relative error is |a - n| / max(|a|, |n|, floor).
const C5_FLOOR: f64 = 1e-6;

fn perturbed(model: &CnnModel<f64>, layer: usize, bias: bool, k: usize, delta: f64) -> CnnModel<f64> {
    let mut copy = model.clone();
    let tensor = match &mut copy.layers_mut()[layer] {
        Layer::Conv(c) if bias => &mut c.bias,
        Layer::Conv(c) => &mut c.weights,
        Layer::Dense(d) if bias => &mut d.bias,
        Layer::Dense(d) => &mut d.weights,
        _ => unreachable!("only parameterised layers are probed"),
    };
    tensor.data_mut()[k] += delta;
    copy
}

fn criterion_5() -> Result<Outcome> {
    let mut rng = rng_from(105);
    let model = CnnModel::<f64>::initialize(&CnnConfig::default(), [10, 10, 3], &mut rng)?;
    let batch = 4;
    let x = Tensor::new(vec![batch, 10, 10, 3], (0..batch * 300).map(|_| rng.random::<f64>()).collect())?;
    let labels = [0, 1, 1, 0];
    let (grads, _) = model.backward(&x, &labels)?;

    let mut worst: f64 = 0.0;
    let mut probes = 0;
    for (layer, grad) in grads.layers.iter().enumerate() {
        let Some((dw, db)) = grad else { continue };
        for (bias, g) in [(false, dw), (true, db)] {
            for _ in 0..C5_PROBES_PER_TENSOR {
                let k = rng.random_range(0..g.len());
                let plus = perturbed(&model, layer, bias, k, C5_STEP).loss(&x, &labels)?;
                let minus = perturbed(&model, layer, bias, k, -C5_STEP).loss(&x, &labels)?;
                let numeric = (plus - minus) / (2.0 * C5_STEP);
                let analytic = g.data()[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(C5_FLOOR);
                worst = worst.max(rel);
                probes += 1;
            }
        }
    }
    Ok(outcome(worst < C5_MAX_REL, format!("{probes} probes over all layers, max relative error {worst:.2e}")))
}

// Criteria 6, 8, 9: desk-scale classification at N = 10.
const DESK_IMAGES_PER_CLASS: usize = 600;
const DESK_SEED: u64 = 2024;
const C6_MIN_ACC: f64 = 0.90;
const C8_CENTER: f64 = 0.50;
const C8_WINDOW: f64 = 0.05;
const C9_MAX_SECONDS: f64 = 600.0;

fn desk_config(dir: &Path, a: &str, b: &str, train_count: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_qubits: 10,
        correlator: "xxyy".into(),
        ensemble_a: a.into(),
        ensemble_b: b.into(),
        images_per_class: DESK_IMAGES_PER_CLASS,
        batch_m: 5,
        train_count,
        seed: DESK_SEED,
        brickwork_depth: DepthChoice::Default,
        ..ExperimentConfig::default()
    };
    cfg.set_output_dir(dir);
    cfg
}

struct DeskRun {
    report: TrainReport,
    generate_seconds: f64,
}

fn criterion_6(dir: &Path) -> Result<(Outcome, DeskRun)> {
    let cfg = desk_config(dir, "pauli1", "haar", 4 * 2 * DESK_IMAGES_PER_CLASS / 5);
    let generated = cmd_generate(&cfg)?;
    cmd_encode(&cfg)?;
    let trained = cmd_train(&cfg)?;
    let acc = trained.report.headline_accuracy().unwrap_or(0.0);
    let detail = format!(
        "pauli1 vs haar, xxyy, N=10, {} train / {} val, {} epochs, last-10 mean val acc {acc:.4} (final {:.4})",
        trained.train_images,
        trained.validation_images,
        trained.report.rows.len(),
        trained.report.final_val_acc().unwrap_or(0.0)
    );
    Ok((outcome(acc >= C6_MIN_ACC, detail), DeskRun { report: trained.report, generate_seconds: generated.seconds }))
}

/// Haar vs Haar. Class 1 uses the same seeds and ensemble as class 1 of
/// criterion 6, so those records are copied from its sample file instead
/// of being drawn again; class 0 is generated fresh.
fn criterion_8(dir: &Path, desk_dir: &Path) -> Result<Outcome> {
    let cfg = desk_config(dir, "haar", "haar", DESK_IMAGES_PER_CLASS);
    let spec = catalog(&cfg.correlator)?;
    let (haar, _) = cfg.ensemble("haar")?;
    let mut samples = SampleFile::new(cfg.n_qubits, &spec, cfg.batch_m)?;
    for index in 0..DESK_IMAGES_PER_CLASS {
        let matrix = sample_matrix(&spec, &haar, cfg.batch_m, cfg.image_seed(0, index), cfg.pair_sharing)?;
        samples.push(0, &matrix)?;
    }
    let desk = SampleFile::read(&desk_config(desk_dir, "pauli1", "haar", 0).samples_path)?;
    samples.records.extend(desk.records.into_iter().filter(|r| r.label == 1));
    samples.write(&cfg.samples_path)?;
    cmd_encode(&cfg)?;
    let trained = cmd_train(&cfg)?;
    let acc = trained.report.headline_accuracy().unwrap_or(0.0);
    Ok(outcome(
        (acc - C8_CENTER).abs() <= C8_WINDOW,
        format!(
            "haar vs haar, xxyy, N=10, {} train / {} val, last-10 mean val acc {acc:.4}",
            trained.train_images, trained.validation_images
        ),
    ))
}

fn criterion_9(run: &DeskRun) -> Outcome {
    let s = run.report.wall_seconds;
    outcome(
        s < C9_MAX_SECONDS,
        format!("criterion 6 training took {s:.1}s over {} epochs (generation {:.0}s)", run.report.rows.len(), run.generate_seconds),
    )
}

// Criterion 7: full scale, opt-in.
const C7_IMAGES_PER_CLASS: usize = 3125;
const C7_TRAIN: usize = 5000;

fn criterion_7(dir: &Path) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for correlator in ["xyxy", "xxyy", "xy2pt", "zz2pt"] {
        for (a, b) in [("pauli1", "brickwork2"), ("brickwork2", "haar")] {
            let sub = dir.join(format!("{correlator}_{a}_{b}"));
            let mut cfg = desk_config(&sub, a, b, C7_TRAIN);
            cfg.correlator = correlator.into();
            cfg.images_per_class = C7_IMAGES_PER_CLASS;
            cmd_generate(&cfg)?;
            cmd_encode(&cfg)?;
            let acc = cmd_train(&cfg)?.report.headline_accuracy().unwrap_or(0.0);
            let needed = if correlator == "zz2pt" { 0.90 } else { 0.97 };
            pass &= acc >= needed;
            parts.push(format!("{correlator} {a}/{b} {acc:.4} (>= {needed})"));
            println!("    criterion 7 progress: {}", parts.last().expect("just pushed"));
        }
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn report(number: u32, title: &str, result: Result<Outcome>, failures: &mut u32, started: Instant) {
    let seconds = started.elapsed().as_secs_f64();
    match result {
        Ok(o) => {
            if !o.pass {
                *failures += 1;
            }
            let verdict = if o.pass { "PASS" } else { "FAIL" };
            println!("criterion {number} [{title}]: {verdict} ({}; {seconds:.1}s)", o.detail);
        }
        Err(e) => {
            *failures += 1;
            println!("criterion {number} [{title}]: FAIL (error: {e}; {seconds:.1}s)");
        }
    }
    std::io::stdout().flush().ok();
}

fn main() -> ExitCode {
    let mut failures = 0;
    let work = tempfile::tempdir().expect("temporary directory");

    let t = Instant::now();
    report(1, "design order at N=2", criterion_1(), &mut failures, t);
    let t = Instant::now();
    report(2, "frame potentials", criterion_2(), &mut failures, t);
    let t = Instant::now();
    report(3, "two-point average factorises", criterion_3(), &mut failures, t);
    let t = Instant::now();
    report(4, "OTOC average decays", criterion_4(), &mut failures, t);
    let t = Instant::now();
    report(5, "gradient check", criterion_5(), &mut failures, t);

    let desk_dir = work.path().join("desk");
    let t = Instant::now();
    let desk = criterion_6(&desk_dir);
    let (c6, c9) = match desk {
        Ok((o, run)) => (Ok(o), Ok(criterion_9(&run))),
        Err(e) => {
            let message = e.to_string();
            (Err(e), Ok(outcome(false, format!("criterion 6 did not run: {message}"))))
        }
    };
    report(6, "desk-scale classification", c6, &mut failures, t);

    if std::env::var("SCRAMBLENET_FULL_SCALE").as_deref() == Ok("1") {
        let t = Instant::now();
        report(7, "full-scale classification", criterion_7(&work.path().join("full")), &mut failures, t);
    } else {
        println!("criterion 7 [full-scale classification]: SKIPPED (multi-hour; set SCRAMBLENET_FULL_SCALE=1 to run)");
    }

    let t = Instant::now();
    report(8, "negative control", criterion_8(&work.path().join("control"), &desk_dir), &mut failures, t);
    report(9, "training wall-clock", c9, &mut failures, Instant::now());

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}

//! The file-based pipeline used by the command-line tool: generate, encode,
//! train and evaluate, with every artefact written under one directory.
//!
//! cargo run --release --example pipeline -- [output_dir]

use std::path::PathBuf;

use scramblenet::experiment::{cmd_encode, cmd_eval, cmd_generate, cmd_train, ExperimentConfig};

fn main() -> scramblenet::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_run".into()));
    let mut cfg = ExperimentConfig::parse(
        "n_qubits = 6\n\
         correlator = xxyy\n\
         ensemble_a = pauli1\n\
         ensemble_b = brickwork2\n\
         images_per_class = 100\n\
         train_count = 160\n\
         epochs = 25\n\
         batch_size = 32\n\
         seed = 5\n",
    )?;
    cfg.set_output_dir(&dir);

    let generated = cmd_generate(&cfg)?;
    for c in &generated.calibrations {
        println!("brickwork depth {}: {}", c.depth, c.rule());
    }
    println!("{} sample records in {:.1}s", generated.records, generated.seconds);

    let dataset = cmd_encode(&cfg)?;
    println!("{} images of {:?}", dataset.len(), dataset.image_dims());

    let trained = cmd_train(&cfg)?;
    println!(
        "trained {} epochs in {:.1}s, validation accuracy {:.3}",
        trained.report.rows.len(),
        trained.report.wall_seconds,
        trained.report.headline_accuracy().unwrap_or(0.0)
    );

    let acc = cmd_eval(&cfg.model_path, &cfg.validation_path, &cfg.eval_path)?;
    println!("re-evaluated checkpoint: {acc:.3}");
    println!("config used:\n{}", cfg.to_text());
    Ok(())
}

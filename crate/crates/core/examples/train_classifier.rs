//! Train the classifier in memory on freshly drawn Pauli-vs-Haar images,
//! then save and reload the checkpoint.
//!
//! cargo run --release --example train_classifier

use scramblenet::cnn::{evaluate, read_checkpoint, train, write_checkpoint, CnnConfig, CnnModel};
use scramblenet::correlators::{catalog, sample_matrix, PairSharing};
use scramblenet::ensembles::EnsembleSpec;
use scramblenet::imaging::{encode_sample_matrix, split_dataset, Dataset, DatasetMetadata};
use scramblenet::seed::{derive, rng_from};

fn main() -> scramblenet::Result<()> {
    let n = 6;
    let m = 5;
    let per_class = 150;
    let spec = catalog("xxyy")?;
    let ensembles = [EnsembleSpec::pauli(n)?, EnsembleSpec::haar(n)?];

    let mut images = Vec::new();
    for (label, ens) in ensembles.iter().enumerate() {
        for index in 0..per_class {
            let seed = derive(42, &[label as u64, index as u64]);
            let samples = sample_matrix(&spec, ens, m, seed, PairSharing::Shared)?;
            images.push(encode_sample_matrix(&samples, label as u8)?);
        }
    }
    let metadata = DatasetMetadata {
        correlator: spec.name.clone(),
        class_names: ["pauli1".into(), "haar".into()],
        n_qubits: n,
        batch_m: m,
        seed: 42,
    };
    let dataset = Dataset::new(images, metadata)?;
    let mut rng = rng_from(1);
    let (train_set, val_set) = split_dataset(&dataset, 240, &mut rng)?;

    let cfg = CnnConfig { epochs: 30, batch_size: 40, ..CnnConfig::default() };
    let (model, report): (CnnModel<f32>, _) = train(&train_set, &val_set, &cfg, &mut rng)?;
    for row in report.rows.iter().step_by(5) {
        println!("epoch {:>3}  loss {:.4}  train acc {:.3}  val acc {:.3}", row.epoch, row.train_loss, row.train_acc, row.val_acc);
    }
    println!("mean val acc over last epochs: {:.3} ({:.1}s)", report.headline_accuracy().unwrap_or(0.0), report.wall_seconds);

    let path = std::env::temp_dir().join("scramblenet_example.qcnn");
    write_checkpoint(&model, &path)?;
    let restored = read_checkpoint::<f32>(&path)?;
    println!("reloaded checkpoint scores {:.3} on validation", evaluate(&restored, &val_set)?);
    Ok(())
}

//! Render correlator sample matrices as PNG images.
//!
//! cargo run --release --example correlator_images -- [output_dir]

use std::path::PathBuf;

use scramblenet::correlators::{catalog, sample_matrix, PairSharing};
use scramblenet::ensembles::EnsembleSpec;
use scramblenet::imaging::encode_sample_matrix;

fn main() -> scramblenet::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "correlator_images".into()));
    let n = 6;
    let m = 5;
    let spec = catalog("xxyy")?;
    let ensembles = [EnsembleSpec::pauli(n)?, EnsembleSpec::haar(n)?];

    for (label, ens) in ensembles.iter().enumerate() {
        for seed in 0..3 {
            let samples = sample_matrix(&spec, ens, m, seed, PairSharing::Shared)?;
            let image = encode_sample_matrix(&samples, label as u8)?;
            let path = dir.join(format!("{}_{}_{seed}.png", spec.name, ens.kind.name()));
            image.write_png(&path)?;
            println!("{} ({}x{}, max |entry| {:.3})", path.display(), image.height, image.width, samples.max_abs());
        }
    }
    Ok(())
}

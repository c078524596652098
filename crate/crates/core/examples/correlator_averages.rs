//! Ensemble averages of the catalog correlators on one pair of sites.
//!
//! The Pauli ensemble leaves operator products unscrambled, so its OTOCs
//! stay on the unit circle; the scrambling ensembles drive them to zero.
//!
//! cargo run --release --example correlator_averages

use scramblenet::correlators::{catalog, ensemble_average, CATALOG};
use scramblenet::ensembles::EnsembleSpec;
use scramblenet::seed::rng_from;

fn main() -> scramblenet::Result<()> {
    let n = 5;
    let (i, j) = (0, 3);
    let trials = 500;
    let mut rng = rng_from(3);
    let specs = [EnsembleSpec::pauli(n)?, EnsembleSpec::brickwork(n, 4 * n)?, EnsembleSpec::haar(n)?];

    println!("N={n}, sites ({i}, {j}), {trials} trials");
    for name in CATALOG {
        let spec = catalog(name)?;
        for ens in &specs {
            let est = ensemble_average(&spec, ens, i, j, trials, &mut rng)?;
            println!(
                "{:<16} {:<12} {:+.4}{:+.4}i  ± {:.4}",
                spec.to_string(),
                ens.kind.name(),
                est.mean.re,
                est.mean.im,
                est.stderr()
            );
        }
    }
    Ok(())
}

//! Moment diagnostics: twirl errors, frame potentials and the brickwork
//! depth calibration.
//!
//! cargo run --release --example design_checks

use scramblenet::ensembles::{
    calibrate_brickwork_depth, estimate_frame_potential, first_moment_twirl_error, pauli_frame_potential_exact,
    second_moment_twirl_error, EnsembleSpec,
};
use scramblenet::seed::rng_from;

fn main() -> scramblenet::Result<()> {
    let n = 2;
    let trials = 2000;
    let mut rng = rng_from(11);

    let calibration = calibrate_brickwork_depth(n, 1e-3, &mut rng)?;
    println!("brickwork depth {} ({})", calibration.depth, calibration.rule());

    let specs = [EnsembleSpec::pauli(n)?, EnsembleSpec::brickwork(n, calibration.depth)?, EnsembleSpec::haar(n)?];
    println!("{:<12} {:>10} {:>10} {:>14}", "ensemble", "1st twirl", "2nd twirl", "F2 estimate");
    for spec in &specs {
        let first = first_moment_twirl_error(spec, trials, &mut rng)?;
        let second = second_moment_twirl_error(spec, trials, &mut rng)?;
        let f2 = estimate_frame_potential(spec, 2, trials, &mut rng)?;
        println!("{:<12} {first:>10.4} {second:>10.4} {:>8.3}±{:.3}", spec.kind.name(), f2.mean, f2.stderr);
    }
    println!("pauli F2 by enumeration at N={n}: {}", pauli_frame_potential_exact(n, 2)?);
    Ok(())
}

//! Draw one unitary from each ensemble and inspect it.
//!
//! cargo run --release --example ensemble_sampling -- [n_qubits]

use scramblenet::ensembles::{default_brickwork_depth, EnsembleSpec};
use scramblenet::quantum::StateVector;
use scramblenet::seed::rng_from;

fn main() -> scramblenet::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).expect("n_qubits must be an integer");
    let mut rng = rng_from(7);
    let psi = StateVector::random(n, &mut rng)?;
    let specs = [EnsembleSpec::pauli(n)?, EnsembleSpec::brickwork(n, default_brickwork_depth(n))?, EnsembleSpec::haar(n)?];

    for spec in &specs {
        let u = spec.sample(&mut rng)?;
        let dense = u.to_dense()?;
        let out = u.apply(&psi)?;
        let back = u.apply_adjoint(&out)?;
        let roundtrip = back.inner(&psi)?.norm();
        println!(
            "{:<12} unitarity error {:.1e}  |<psi|U^dag U|psi>| = {roundtrip:.12}  |tr U|/d = {:.4}",
            spec.kind.name(),
            dense.unitarity_error(),
            dense.trace().norm() / dense.dim() as f64,
        );
    }
    Ok(())
}

//! Unitary ensembles and checks of their design order.
//!
//! Three samplers are provided: uniformly random Pauli strings (an exact
//! 1-design), brickwork circuits of Haar two-qubit gates (an approximate
//! 2-design once deep enough) and Haar unitaries from the phase-fixed QR of a
//! complex Ginibre matrix. The diagnostics compare first and second moment
//! channels against the Haar ones and estimate frame potentials.

use std::fmt;
use std::str::FromStr;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder::{
    apply_block_householder_sequence_on_the_left_in_place_scratch,
    apply_block_householder_sequence_on_the_left_in_place_with_conj,
    apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj,
};
use faer::{Conj, Mat, MatMut, Par};
use rand::Rng;

use crate::quantum::{
    complex_normal, dimension, frobenius_distance, pauli_string_on, DenseUnitary, PauliLabel,
    PauliString, StateVector, C64,
};
use crate::seed::rng_from;
use crate::{Error, Result};

/// First-moment diagnostics materialise `d x d` matrices.
pub const MAX_FIRST_MOMENT_QUBITS: usize = 6;
/// Second-moment diagnostics work on the doubled space, `d^2 x d^2`.
pub const MAX_SECOND_MOMENT_QUBITS: usize = 3;
/// Largest register for which a dense unitary is sampled.
pub const MAX_DENSE_QUBITS: usize = 14;
/// Exhaustive Pauli enumeration visits `16^n` pairs.
pub const MAX_EXACT_PAULI_QUBITS: usize = 5;
pub const DEFAULT_DEPTH_CAP: usize = 64;
/// Calibration measures at this size and extrapolates above it.
pub const MAX_CALIBRATION_QUBITS: usize = 3;

/// Depth used when calibration is skipped: 4 layers per qubit (40 at N = 10).
pub fn default_brickwork_depth(n_qubits: usize) -> usize {
    (4 * n_qubits).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnsembleKind {
    Pauli1Design,
    Brickwork2Design { depth: usize, epsilon_target: f64 },
    Haar,
}

impl EnsembleKind {
    /// Short name used in configs, file metadata and CSVs.
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleKind::Pauli1Design => "pauli1",
            EnsembleKind::Brickwork2Design { .. } => "brickwork2",
            EnsembleKind::Haar => "haar",
        }
    }

    pub fn brickwork(depth: usize) -> Self {
        EnsembleKind::Brickwork2Design { depth, epsilon_target: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        if let EnsembleKind::Brickwork2Design { depth, epsilon_target } = *self {
            if depth == 0 {
                return Err(Error::Argument("brickwork depth must be at least 1".into()));
            }
            if !(epsilon_target > 0.0 && epsilon_target < 1.0) {
                return Err(Error::Argument(format!(
                    "epsilon_target {epsilon_target} outside (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::Brickwork2Design { depth, .. } => write!(f, "brickwork2(depth={depth})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `pauli1`, `haar`, `brickwork2` (default depth chosen later) or
/// `brickwork2:<depth>`.
impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pauli1" | "pauli" | "1design" => Ok(EnsembleKind::Pauli1Design),
            "haar" | "cue" => Ok(EnsembleKind::Haar),
            "brickwork2" | "brickwork" | "2design" => Ok(EnsembleKind::brickwork(0)),
            _ => {
                if let Some(depth) = lower.strip_prefix("brickwork2:") {
                    let depth = depth
                        .parse()
                        .map_err(|_| Error::Lookup(format!("bad brickwork depth in {s:?}")))?;
                    return Ok(EnsembleKind::brickwork(depth));
                }
                Err(Error::Lookup(format!("unknown ensemble {s:?}")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n_qubits: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n_qubits: usize) -> Result<Self> {
        let spec = Self { kind, n_qubits };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pauli(n_qubits: usize) -> Result<Self> {
        Self::new(EnsembleKind::Pauli1Design, n_qubits)
    }

    pub fn haar(n_qubits: usize) -> Result<Self> {
        Self::new(EnsembleKind::Haar, n_qubits)
    }

    pub fn brickwork(n_qubits: usize, depth: usize) -> Result<Self> {
        Self::new(EnsembleKind::brickwork(depth), n_qubits)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        dimension(self.n_qubits)?;
        if matches!(self.kind, EnsembleKind::Brickwork2Design { .. }) && self.n_qubits < 2 {
            return Err(Error::Argument("brickwork circuits need at least 2 qubits".into()));
        }
        if !matches!(self.kind, EnsembleKind::Pauli1Design) && self.n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Capacity(format!(
                "dense unitaries limited to {MAX_DENSE_QUBITS} qubits"
            )));
        }
        Ok(())
    }

    /// One ensemble member.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UnitaryRep> {
        self.validate()?;
        Ok(match self.kind {
            EnsembleKind::Pauli1Design => UnitaryRep::Pauli(random_pauli_string(self.n_qubits, rng)),
            EnsembleKind::Haar => UnitaryRep::Householder(HaarFactors::sample(self.n_qubits, rng)?),
            EnsembleKind::Brickwork2Design { depth, .. } => {
                UnitaryRep::Circuit(BrickworkCircuit::sample(self.n_qubits, depth, rng)?)
            }
        })
    }
}

/// A sampled ensemble member.
#[derive(Clone, Debug, PartialEq)]
pub enum UnitaryRep {
    Pauli(PauliString),
    Dense(DenseUnitary),
    /// Haar member kept in factored form; applying it to a block of vectors
    /// is cheaper than forming the matrix.
    Householder(HaarFactors),
    Circuit(BrickworkCircuit),
}

impl UnitaryRep {
    pub fn n_qubits(&self) -> usize {
        match self {
            UnitaryRep::Pauli(p) => p.len(),
            UnitaryRep::Dense(u) => u.n_qubits(),
            UnitaryRep::Householder(h) => h.n_qubits,
            UnitaryRep::Circuit(c) => c.n_qubits,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        match self {
            UnitaryRep::Pauli(p) => psi.apply_pauli_string(p),
            UnitaryRep::Dense(u) => psi.apply_dense(u),
            UnitaryRep::Householder(h) => StateVector::from_amplitudes(h.n_qubits, h.apply_block(false, psi.amplitudes(), 1)),
            UnitaryRep::Circuit(c) => StateVector::from_amplitudes(c.n_qubits, c.apply_block(false, psi.amplitudes(), 1)),
        }
    }

    pub fn apply_adjoint(&self, psi: &StateVector) -> Result<StateVector> {
        match self {
            // phase-free Pauli strings are Hermitian
            UnitaryRep::Pauli(p) => psi.apply_pauli_string(p),
            UnitaryRep::Dense(u) => psi.apply_dense_adjoint(u),
            UnitaryRep::Householder(h) => StateVector::from_amplitudes(h.n_qubits, h.apply_block(true, psi.amplitudes(), 1)),
            UnitaryRep::Circuit(c) => StateVector::from_amplitudes(c.n_qubits, c.apply_block(true, psi.amplitudes(), 1)),
        }
    }

    /// Applies `U` or `U†` to `count` back-to-back column vectors.
    pub(crate) fn apply_block(&self, adjoint: bool, block: &[C64], count: usize) -> Vec<C64> {
        match self {
            UnitaryRep::Pauli(p) => {
                let mut out = block.to_vec();
                let dim = block.len() / count.max(1);
                for column in out.chunks_exact_mut(dim) {
                    pauli_string_on(column, p);
                }
                out
            }
            UnitaryRep::Dense(u) => u.apply_block(adjoint, block, count),
            UnitaryRep::Householder(h) => h.apply_block(adjoint, block, count),
            UnitaryRep::Circuit(c) => c.apply_block(adjoint, block, count),
        }
    }

    pub fn to_dense(&self) -> Result<DenseUnitary> {
        match self {
            UnitaryRep::Pauli(p) => p.to_dense(),
            UnitaryRep::Dense(u) => Ok(u.clone()),
            UnitaryRep::Householder(h) => h.to_dense(),
            UnitaryRep::Circuit(c) => c.to_dense(),
        }
    }

    /// `tr(self† other)`.
    pub fn overlap(&self, other: &UnitaryRep) -> Result<C64> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::Shape("overlap of unitaries on different registers".into()));
        }
        match (self, other) {
            (UnitaryRep::Pauli(p), UnitaryRep::Pauli(q)) => Ok(p.trace_product(q)),
            _ => {
                let (a, b) = (self.to_dense()?, other.to_dense()?);
                Ok(a.entries().iter().zip(b.entries()).map(|(x, y)| x.conj() * y).sum())
            }
        }
    }
}

pub fn random_pauli_string<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> PauliString {
    PauliString::new(
        (0..n_qubits)
            .map(|_| PauliLabel::ALL[rng.random_range(0..4)])
            .collect(),
    )
}

/// Haar unitary: QR of a complex Ginibre matrix with each column of Q
/// rescaled by the phase of the matching diagonal entry of R.
pub fn haar_unitary<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<DenseUnitary> {
    HaarFactors::sample(n_qubits, rng)?.to_dense()
}

/// `U = Q diag(phases)` with `Q` held as blocked Householder reflectors from
/// the QR of a Ginibre matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarFactors {
    n_qubits: usize,
    basis: Mat<C64>,
    coeff: Mat<C64>,
    phases: Vec<C64>,
}

impl HaarFactors {
    pub fn sample<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        if n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::Capacity(format!("dense unitaries limited to {MAX_DENSE_QUBITS} qubits")));
        }
        let mut draws = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            draws.push(complex_normal(rng));
        }
        let ginibre = Mat::<C64>::from_fn(dim, dim, |r, c| draws[r * dim + c]);
        drop(draws);
        let qr = ginibre.qr();
        let r = qr.R();
        let phases = (0..dim)
            .map(|k| {
                let diag = r[(k, k)];
                let norm = diag.norm();
                if norm > 0.0 {
                    diag / norm
                } else {
                    C64::new(1.0, 0.0)
                }
            })
            .collect();
        Ok(Self { n_qubits, basis: qr.Q_basis().to_owned(), coeff: qr.Q_coeff().to_owned(), phases })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `U` or `U†` applied to `count` back-to-back column vectors.
    pub(crate) fn apply_block(&self, adjoint: bool, block: &[C64], count: usize) -> Vec<C64> {
        let dim = self.phases.len();
        let mut out = block.to_vec();
        let scratch = apply_block_householder_sequence_on_the_left_in_place_scratch::<C64>(dim, self.coeff.nrows(), count);
        let mut buffer = MemBuffer::new(scratch);
        let stack = MemStack::new(&mut buffer);
        if adjoint {
            let mat = MatMut::from_column_major_slice_mut(&mut out, dim, count);
            apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
                self.basis.as_ref(),
                self.coeff.as_ref(),
                Conj::Yes,
                mat,
                Par::Seq,
                stack,
            );
            for column in out.chunks_exact_mut(dim) {
                for (x, p) in column.iter_mut().zip(&self.phases) {
                    *x *= p.conj();
                }
            }
        } else {
            for column in out.chunks_exact_mut(dim) {
                for (x, p) in column.iter_mut().zip(&self.phases) {
                    *x *= p;
                }
            }
            let mat = MatMut::from_column_major_slice_mut(&mut out, dim, count);
            apply_block_householder_sequence_on_the_left_in_place_with_conj(
                self.basis.as_ref(),
                self.coeff.as_ref(),
                Conj::No,
                mat,
                Par::Seq,
                stack,
            );
        }
        out
    }

    pub fn to_dense(&self) -> Result<DenseUnitary> {
        let dim = self.phases.len();
        let mut identity = vec![C64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            identity[k * dim + k] = C64::new(1.0, 0.0);
        }
        // Column-major U equals row-major U^T; transpose back.
        let cols = self.apply_block(false, &identity, dim);
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                entries[r * dim + c] = cols[c * dim + r];
            }
        }
        DenseUnitary::from_entries_unchecked(self.n_qubits, entries)
    }
}

/// Pairs acted on by brickwork layer `layer` of an open chain.
pub fn brickwork_pairs(n_qubits: usize, layer: usize) -> impl Iterator<Item = (usize, usize)> {
    let start = layer % 2;
    (start..n_qubits.saturating_sub(1)).step_by(2).map(|a| (a, a + 1))
}

/// `depth` alternating layers of independent Haar 2-qubit gates: even
/// layers on (0,1),(2,3),..., odd layers on (1,2),(3,4),...
pub fn brickwork_unitary<R: Rng + ?Sized>(
    n_qubits: usize,
    depth: usize,
    rng: &mut R,
) -> Result<DenseUnitary> {
    BrickworkCircuit::sample(n_qubits, depth, rng)?.to_dense()
}

/// A brickwork circuit kept as its gate list, applied gate by gate.
#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkCircuit {
    n_qubits: usize,
    depth: usize,
    /// `(first site, row-major 4x4 gate)` in application order.
    gates: Vec<(usize, DenseUnitary)>,
}

impl BrickworkCircuit {
    pub fn sample<R: Rng + ?Sized>(n_qubits: usize, depth: usize, rng: &mut R) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::Argument("brickwork circuits need at least 2 qubits".into()));
        }
        dimension(n_qubits)?;
        let mut gates = Vec::new();
        for layer in 0..depth {
            for (a, _) in brickwork_pairs(n_qubits, layer) {
                gates.push((a, haar_unitary(2, rng)?));
            }
        }
        Ok(Self { n_qubits, depth, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub(crate) fn apply_block(&self, adjoint: bool, block: &[C64], count: usize) -> Vec<C64> {
        let mut out = block.to_vec();
        let dim = block.len() / count.max(1);
        for column in out.chunks_exact_mut(dim) {
            if adjoint {
                for (site, gate) in self.gates.iter().rev() {
                    apply_two_qubit_gate(column, self.n_qubits, *site, gate.entries(), true);
                }
            } else {
                for (site, gate) in &self.gates {
                    apply_two_qubit_gate(column, self.n_qubits, *site, gate.entries(), false);
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<DenseUnitary> {
        let dim = dimension(self.n_qubits)?;
        let mut entries = DenseUnitary::identity(self.n_qubits)?.entries().to_vec();
        for (site, gate) in &self.gates {
            apply_two_qubit_gate_rows(&mut entries, dim, self.n_qubits, *site, gate);
        }
        DenseUnitary::from_entries_unchecked(self.n_qubits, entries)
    }
}

/// Applies a 4x4 gate (or its adjoint) on sites `(site, site + 1)` of a
/// state vector.
fn apply_two_qubit_gate(v: &mut [C64], n_qubits: usize, site: usize, g: &[C64], adjoint: bool) {
    let hi = 1usize << (n_qubits - 1 - site);
    let lo = hi >> 1;
    let coeff = |r: usize, c: usize| if adjoint { g[c * 4 + r].conj() } else { g[r * 4 + c] };
    let m: [C64; 16] = std::array::from_fn(|k| coeff(k / 4, k % 4));
    for base in 0..v.len() {
        if base & (hi | lo) != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | hi | lo];
        let x = [v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]];
        for (r, &i) in idx.iter().enumerate() {
            v[i] = m[r * 4] * x[0] + m[r * 4 + 1] * x[1] + m[r * 4 + 2] * x[2] + m[r * 4 + 3] * x[3];
        }
    }
}

/// Left-multiplies a row-major `dim x dim` matrix by `gate` on sites
/// `(site, site + 1)`.
fn apply_two_qubit_gate_rows(
    entries: &mut [C64],
    dim: usize,
    n_qubits: usize,
    site: usize,
    gate: &DenseUnitary,
) {
    let hi = 1usize << (n_qubits - 1 - site);
    let lo = hi >> 1;
    let g = gate.entries();
    let mut rows = vec![C64::new(0.0, 0.0); 4 * dim];
    for base in 0..dim {
        if base & (hi | lo) != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | hi | lo];
        for (slot, &r) in idx.iter().enumerate() {
            rows[slot * dim..(slot + 1) * dim].copy_from_slice(&entries[r * dim..(r + 1) * dim]);
        }
        for (out_slot, &r) in idx.iter().enumerate() {
            let target = &mut entries[r * dim..(r + 1) * dim];
            target.iter_mut().for_each(|t| *t = C64::new(0.0, 0.0));
            for in_slot in 0..4 {
                let coeff = g[out_slot * 4 + in_slot];
                if coeff == C64::new(0.0, 0.0) {
                    continue;
                }
                for (t, s) in target.iter_mut().zip(&rows[in_slot * dim..(in_slot + 1) * dim]) {
                    *t += coeff * s;
                }
            }
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, stderr: (var / n).sqrt() }
    }

    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0 }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Frobenius distance between `(1/T) Σ U ρ U†` and `I/d` for a random pure
/// `ρ` drawn from `rng`.
pub fn first_moment_twirl_error<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    check_trials(trials)?;
    if spec.n_qubits > MAX_FIRST_MOMENT_QUBITS {
        return Err(Error::Capacity(format!(
            "first-moment twirl limited to {MAX_FIRST_MOMENT_QUBITS} qubits"
        )));
    }
    spec.validate()?;
    let psi = StateVector::random(spec.n_qubits, rng)?;
    let dim = psi.dim();
    let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
    for _ in 0..trials {
        let u = spec.sample(rng)?;
        let image = u.apply(&psi)?;
        accumulate_outer(&mut acc, image.amplitudes());
    }
    let scale = 1.0 / trials as f64;
    let mut target = vec![C64::new(0.0, 0.0); dim * dim];
    for k in 0..dim {
        target[k * dim + k] = C64::new(1.0 / dim as f64, 0.0);
    }
    acc.iter_mut().for_each(|z| *z *= scale);
    Ok(frobenius_distance(&acc, &target))
}

fn accumulate_outer(acc: &mut [C64], v: &[C64]) {
    let dim = v.len();
    for (r, a) in v.iter().enumerate() {
        let row = &mut acc[r * dim..(r + 1) * dim];
        for (slot, b) in row.iter_mut().zip(v) {
            *slot += a * b.conj();
        }
    }
}

/// `(U ⊗ U) |Ψ>` for `|Ψ>` on the doubled register.
pub(crate) fn apply_doubled(u: &UnitaryRep, psi: &[C64]) -> Result<Vec<C64>> {
    match u {
        UnitaryRep::Pauli(p) => {
            let mut labels = p.labels().to_vec();
            labels.extend_from_slice(p.labels());
            let mut out = psi.to_vec();
            pauli_string_on(&mut out, &PauliString::new(labels));
            Ok(out)
        }
        UnitaryRep::Householder(_) | UnitaryRep::Circuit(_) => apply_doubled(&UnitaryRep::Dense(u.to_dense()?), psi),
        UnitaryRep::Dense(m) => {
            // Ψ as a d x d matrix X (first copy = row); result is U X U^T.
            let dim = m.dim();
            let e = m.entries();
            let mut ux = vec![C64::new(0.0, 0.0); dim * dim];
            for a in 0..dim {
                for c in 0..dim {
                    let coeff = e[a * dim + c];
                    for b in 0..dim {
                        ux[a * dim + b] += coeff * psi[c * dim + b];
                    }
                }
            }
            let mut out = vec![C64::new(0.0, 0.0); dim * dim];
            for a in 0..dim {
                for b in 0..dim {
                    out[a * dim + b] = (0..dim).map(|c| ux[a * dim + c] * e[b * dim + c]).sum();
                }
            }
            Ok(out)
        }
    }
}

/// Fixed input and Haar reference for second-moment comparisons.
///
/// The reference channel output is a Monte-Carlo Haar average, so distances
/// measured against it carry a statistical floor of order `1/sqrt(trials)`.
#[derive(Clone, Debug)]
pub struct SecondMomentProbe {
    n_qubits: usize,
    input: Vec<C64>,
    reference: Vec<C64>,
}

impl SecondMomentProbe {
    pub fn new<R: Rng + ?Sized>(n_qubits: usize, reference_trials: usize, rng: &mut R) -> Result<Self> {
        check_trials(reference_trials)?;
        if n_qubits > MAX_SECOND_MOMENT_QUBITS {
            return Err(Error::Capacity(format!(
                "second-moment twirl limited to {MAX_SECOND_MOMENT_QUBITS} qubits"
            )));
        }
        let input = StateVector::random(2 * n_qubits, rng)?.into_amplitudes();
        let haar = EnsembleSpec::haar(n_qubits)?;
        let reference = second_moment_output(&haar, &input, reference_trials, rng)?;
        Ok(Self { n_qubits, input, reference })
    }

    pub fn input(&self) -> &[C64] {
        &self.input
    }

    pub fn reference(&self) -> &[C64] {
        &self.reference
    }

    pub fn distance<R: Rng + ?Sized>(&self, spec: &EnsembleSpec, trials: usize, rng: &mut R) -> Result<f64> {
        if spec.n_qubits != self.n_qubits {
            return Err(Error::Shape(format!(
                "probe built for {} qubits, ensemble has {}",
                self.n_qubits, spec.n_qubits
            )));
        }
        let output = second_moment_output(spec, &self.input, trials, rng)?;
        Ok(frobenius_distance(&output, &self.reference))
    }
}

/// `(1/T) Σ (U⊗U) ρ (U†⊗U†)` for the pure input `ρ = |Ψ><Ψ|`.
pub fn second_moment_output<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    input: &[C64],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<C64>> {
    check_trials(trials)?;
    spec.validate()?;
    let d2 = input.len();
    let mut acc = vec![C64::new(0.0, 0.0); d2 * d2];
    for _ in 0..trials {
        let u = spec.sample(rng)?;
        accumulate_outer(&mut acc, &apply_doubled(&u, input)?);
    }
    let scale = 1.0 / trials as f64;
    acc.iter_mut().for_each(|z| *z *= scale);
    Ok(acc)
}

/// Frobenius distance between the ensemble's and the Haar second-moment
/// channel on one random pure input; the Haar side uses `10 * trials` draws.
pub fn second_moment_twirl_error<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    check_trials(trials)?;
    if spec.n_qubits > MAX_SECOND_MOMENT_QUBITS {
        return Err(Error::Capacity(format!(
            "second-moment twirl limited to {MAX_SECOND_MOMENT_QUBITS} qubits"
        )));
    }
    spec.validate()?;
    let mut reference_rng = rng_from(rng.next_u64());
    let probe = SecondMomentProbe::new(spec.n_qubits, 10 * trials, &mut reference_rng)?;
    probe.distance(spec, trials, rng)
}

/// Monte-Carlo `F^(k) = E |tr(U† V)|^{2k}` over independent pairs.
pub fn estimate_frame_potential<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    k: u32,
    pairs: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if !(1..=2).contains(&k) {
        return Err(Error::Argument(format!("frame potential order {k} not in {{1, 2}}")));
    }
    check_trials(pairs)?;
    spec.validate()?;
    let mut samples = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let u = spec.sample(rng)?;
        let v = spec.sample(rng)?;
        samples.push(u.overlap(&v)?.norm_sqr().powi(k as i32));
    }
    Ok(Estimate::from_samples(&samples))
}

/// Exact Pauli-ensemble frame potential by enumerating all `16^n` pairs.
pub fn pauli_frame_potential_exact(n_qubits: usize, k: u32) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(Error::Argument(format!("frame potential order {k} not in {{1, 2}}")));
    }
    if n_qubits > MAX_EXACT_PAULI_QUBITS {
        return Err(Error::Capacity(format!(
            "exact Pauli enumeration limited to {MAX_EXACT_PAULI_QUBITS} qubits"
        )));
    }
    dimension(n_qubits)?;
    let count = 1usize << (2 * n_qubits);
    let strings: Vec<PauliString> = (0..count).map(|i| PauliString::from_index(n_qubits, i)).collect();
    let mut total = 0.0;
    for p in &strings {
        for q in &strings {
            total += p.trace_product(q).norm_sqr().powi(k as i32);
        }
    }
    Ok(total / (count * count) as f64)
}

/// Result of [`calibrate_brickwork_depth`].
#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkCalibration {
    /// Depth to use at the requested size.
    pub depth: usize,
    pub requested_qubits: usize,
    pub measured_qubits: usize,
    pub measured_depth: usize,
    /// Haar-vs-reference distance, the noise level of the measurement.
    pub statistical_floor: f64,
    pub measured_error: f64,
    pub epsilon_target: f64,
}

impl BrickworkCalibration {
    /// Human-readable description of how `depth` was obtained.
    pub fn rule(&self) -> String {
        if self.requested_qubits == self.measured_qubits {
            format!(
                "measured: smallest depth with second-moment error < {} + floor {:.4} at N={}",
                self.epsilon_target, self.statistical_floor, self.measured_qubits
            )
        } else {
            format!(
                "extrapolated: ceil({} * {} / {}) from measurement at N={} (linear in qubit count)",
                self.measured_depth, self.requested_qubits, self.measured_qubits, self.measured_qubits
            )
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CalibrationOptions {
    pub trials: usize,
    pub depth_cap: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { trials: 5000, depth_cap: DEFAULT_DEPTH_CAP }
    }
}

/// Smallest brickwork depth whose second-moment error is within
/// `epsilon_target` of the Haar statistical floor.
///
/// Measures at `min(n_qubits, 3)` qubits. For larger registers the measured
/// depth is scaled linearly: `ceil(measured_depth * n / 3)`.
pub fn calibrate_brickwork_depth<R: Rng + ?Sized>(
    n_qubits: usize,
    epsilon_target: f64,
    rng: &mut R,
) -> Result<BrickworkCalibration> {
    calibrate_brickwork_depth_with(n_qubits, epsilon_target, CalibrationOptions::default(), rng)
}

pub fn calibrate_brickwork_depth_with<R: Rng + ?Sized>(
    n_qubits: usize,
    epsilon_target: f64,
    options: CalibrationOptions,
    rng: &mut R,
) -> Result<BrickworkCalibration> {
    if n_qubits < 2 {
        return Err(Error::Argument("brickwork calibration needs at least 2 qubits".into()));
    }
    if !(epsilon_target > 0.0) {
        return Err(Error::Argument("epsilon_target must be positive".into()));
    }
    let measured_qubits = n_qubits.min(MAX_CALIBRATION_QUBITS);
    let probe = SecondMomentProbe::new(measured_qubits, 10 * options.trials, rng)?;
    let floor = probe.distance(&EnsembleSpec::haar(measured_qubits)?, options.trials, rng)?;
    for depth in 1..=options.depth_cap {
        let spec = EnsembleSpec::brickwork(measured_qubits, depth)?;
        let err = probe.distance(&spec, options.trials, rng)?;
        if err < epsilon_target + floor {
            let depth_at_n = (depth * n_qubits).div_ceil(measured_qubits);
            return Ok(BrickworkCalibration {
                depth: depth_at_n,
                requested_qubits: n_qubits,
                measured_qubits,
                measured_depth: depth,
                statistical_floor: floor,
                measured_error: err,
                epsilon_target,
            });
        }
    }
    Err(Error::Calibration(format!(
        "no depth up to {} reached second-moment error {} + floor {floor:.4} at N={measured_qubits}",
        options.depth_cap, epsilon_target
    )))
}

//! Correlator samples over all insertion sites.
//!
//! A two-point term is `<σ| A_i U† B_j U |σ>` and a four-point OTOC term is
//! `<σ| A_i U† B_j U C_i U† D_j U |σ>`. A [`SampleMatrix`] holds, for every
//! site pair `(i, j)`, the sum of `m` such terms over independently drawn
//! `(σ, U)` pairs.

use std::fmt;
use std::path::Path;

use rand::Rng;

use crate::binio::{read_file, write_file, ByteReader};
use crate::ensembles::{EnsembleKind, EnsembleSpec, UnitaryRep};
use crate::quantum::{inner_slices, pauli_on_site, PauliLabel, StateVector, C64};
use crate::seed::rng_from;
use crate::{Error, Result};

pub const DEFAULT_BATCH_M: usize = 5;
pub const CATALOG: [&str; 4] = ["xyxy", "xxyy", "xy2pt", "zz2pt"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelatorForm {
    TwoPoint { a: PauliLabel, b: PauliLabel },
    Otoc4 { a: PauliLabel, b: PauliLabel, c: PauliLabel, d: PauliLabel },
}

impl CorrelatorForm {
    fn labels(&self) -> Vec<PauliLabel> {
        match *self {
            CorrelatorForm::TwoPoint { a, b } => vec![a, b],
            CorrelatorForm::Otoc4 { a, b, c, d } => vec![a, b, c, d],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelatorSpec {
    pub form: CorrelatorForm,
    pub name: String,
}

impl CorrelatorSpec {
    pub fn new(name: impl Into<String>, form: CorrelatorForm) -> Result<Self> {
        if form.labels().contains(&PauliLabel::I) {
            return Err(Error::Argument("correlator insertions must be non-identity Paulis".into()));
        }
        Ok(Self { form, name: name.into() })
    }

    /// Catalog position, used as the correlator id in sample files.
    pub fn catalog_id(&self) -> Option<u8> {
        CATALOG.iter().position(|&n| n == self.name).map(|p| p as u8)
    }
}

impl fmt::Display for CorrelatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: String = self.form.labels().iter().map(|l| l.as_char()).collect();
        write!(f, "{} ({letters})", self.name)
    }
}

/// The four named correlators.
pub fn catalog(name: &str) -> Result<CorrelatorSpec> {
    use PauliLabel::{X, Y, Z};
    let form = match name {
        "xyxy" => CorrelatorForm::Otoc4 { a: X, b: Y, c: X, d: Y },
        "xxyy" => CorrelatorForm::Otoc4 { a: X, b: X, c: Y, d: Y },
        "xy2pt" => CorrelatorForm::TwoPoint { a: X, b: Y },
        "zz2pt" => CorrelatorForm::TwoPoint { a: Z, b: Z },
        other => return Err(Error::Lookup(format!("unknown correlator {other:?}"))),
    };
    CorrelatorSpec::new(name, form)
}

pub fn catalog_by_id(id: u8) -> Result<CorrelatorSpec> {
    CATALOG
        .get(id as usize)
        .ok_or_else(|| Error::Lookup(format!("unknown correlator id {id}")))
        .and_then(|name| catalog(name))
}

fn check_sites(n_qubits: usize, i: usize, j: usize) -> Result<()> {
    if i >= n_qubits || j >= n_qubits {
        return Err(Error::Index(format!("sites ({i}, {j}) on {n_qubits} qubits")));
    }
    Ok(())
}

/// One correlator term, evaluated right to left on state vectors.
pub fn sample_term(
    sigma: &StateVector,
    u: &UnitaryRep,
    spec: &CorrelatorSpec,
    i: usize,
    j: usize,
) -> Result<C64> {
    let n = sigma.n_qubits();
    if u.n_qubits() != n {
        return Err(Error::Shape(format!("unitary on {} qubits, state on {n}", u.n_qubits())));
    }
    check_sites(n, i, j)?;
    let mut v = u.apply(sigma)?;
    match spec.form {
        CorrelatorForm::TwoPoint { a, b } => {
            v.apply_pauli_in_place(j, b)?;
            let v = u.apply_adjoint(&v)?;
            sigma.apply_pauli(i, a)?.inner(&v)
        }
        CorrelatorForm::Otoc4 { a, b, c, d } => {
            v.apply_pauli_in_place(j, d)?;
            let mut v = u.apply_adjoint(&v)?;
            v.apply_pauli_in_place(i, c)?;
            let mut v = u.apply(&v)?;
            v.apply_pauli_in_place(j, b)?;
            let v = u.apply_adjoint(&v)?;
            // A† = A for Pauli insertions
            sigma.apply_pauli(i, a)?.inner(&v)
        }
    }
}

/// All `N x N` terms for one `(σ, U)` pair, row-major in `(i, j)`.
///
/// Shares the `j`-only and `i`-only pieces across the grid and pushes the
/// remaining unitary applications through one matrix-matrix product.
pub fn term_matrix(sigma: &StateVector, u: &UnitaryRep, spec: &CorrelatorSpec) -> Result<Vec<C64>> {
    let n = sigma.n_qubits();
    if u.n_qubits() != n {
        return Err(Error::Shape(format!("unitary on {} qubits, state on {n}", u.n_qubits())));
    }
    let dim = sigma.dim();
    let sigma_amps = sigma.amplitudes();

    let with_pauli = |src: &[C64], site: usize, label: PauliLabel| {
        let mut v = src.to_vec();
        pauli_on_site(&mut v, n, site, label);
        v
    };

    let (a, b) = match spec.form {
        CorrelatorForm::TwoPoint { a, b } => (a, b),
        CorrelatorForm::Otoc4 { a, b, .. } => (a, b),
    };
    // eta_i = U A_i σ
    let eta_in: Vec<C64> = (0..n).flat_map(|i| with_pauli(sigma_amps, i, a)).collect();
    let eta = u.apply_block(false, &eta_in, n);
    let phi = u.apply_block(false, sigma_amps, 1);

    let mut out = Vec::with_capacity(n * n);
    match spec.form {
        CorrelatorForm::TwoPoint { .. } => {
            let b_phi: Vec<Vec<C64>> = (0..n).map(|j| with_pauli(&phi, j, b)).collect();
            for i in 0..n {
                let eta_i = &eta[i * dim..(i + 1) * dim];
                for b_phi_j in &b_phi {
                    out.push(inner_slices(eta_i, b_phi_j));
                }
            }
        }
        CorrelatorForm::Otoc4 { c, d, .. } => {
            // v_j = U† D_j U σ
            let d_phi: Vec<C64> = (0..n).flat_map(|j| with_pauli(&phi, j, d)).collect();
            let v = u.apply_block(true, &d_phi, n);
            // w_ij = C_i v_j, then y_ij = U w_ij
            let mut w = Vec::with_capacity(n * n * dim);
            for i in 0..n {
                for j in 0..n {
                    w.extend(with_pauli(&v[j * dim..(j + 1) * dim], i, c));
                }
            }
            let mut y = u.apply_block(false, &w, n * n);
            for i in 0..n {
                let eta_i = &eta[i * dim..(i + 1) * dim];
                for j in 0..n {
                    let y_ij = &mut y[(i * n + j) * dim..(i * n + j + 1) * dim];
                    pauli_on_site(y_ij, n, j, b);
                    out.push(inner_slices(eta_i, y_ij));
                }
            }
        }
    }
    Ok(out)
}

/// Whether the `m` draws are shared by every pixel or redrawn per pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairSharing {
    #[default]
    Shared,
    PerPixel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub n_qubits: usize,
    /// Row-major `(i, j)` entries.
    pub entries: Vec<C64>,
    pub batch_m: usize,
    pub ensemble: EnsembleKind,
    pub correlator: String,
    pub seed: u64,
}

impl SampleMatrix {
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.n_qubits + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Sums `m` correlator terms for every site pair; the stream is
/// `ChaCha8(seed)`, drawing `σ_n` then `U_n` for `n = 1..m`.
pub fn sample_matrix(
    spec: &CorrelatorSpec,
    ens: &EnsembleSpec,
    m: usize,
    seed: u64,
    sharing: PairSharing,
) -> Result<SampleMatrix> {
    if m == 0 {
        return Err(Error::Argument("batch number m must be at least 1".into()));
    }
    ens.validate()?;
    let n = ens.n_qubits;
    let mut rng = rng_from(seed);
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    match sharing {
        PairSharing::Shared => {
            for _ in 0..m {
                let sigma = StateVector::random(n, &mut rng)?;
                let u = ens.sample(&mut rng)?;
                for (acc, term) in entries.iter_mut().zip(term_matrix(&sigma, &u, spec)?) {
                    *acc += term;
                }
            }
        }
        PairSharing::PerPixel => {
            for i in 0..n {
                for j in 0..n {
                    for _ in 0..m {
                        let sigma = StateVector::random(n, &mut rng)?;
                        let u = ens.sample(&mut rng)?;
                        entries[i * n + j] += sample_term(&sigma, &u, spec, i, j)?;
                    }
                }
            }
        }
    }
    Ok(SampleMatrix {
        n_qubits: n,
        entries,
        batch_m: m,
        ensemble: ens.kind,
        correlator: spec.name.clone(),
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEstimate {
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl ComplexEstimate {
    /// Standard error of the complex mean, `sqrt(se_re^2 + se_im^2)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}

/// Monte-Carlo ensemble average of one term with fresh `σ` and `U` per trial.
pub fn ensemble_average<R: Rng + ?Sized>(
    spec: &CorrelatorSpec,
    ens: &EnsembleSpec,
    i: usize,
    j: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ComplexEstimate> {
    if trials < 2 {
        return Err(Error::Argument("ensemble_average needs at least 2 trials".into()));
    }
    ens.validate()?;
    check_sites(ens.n_qubits, i, j)?;
    let mut terms = Vec::with_capacity(trials);
    for _ in 0..trials {
        let sigma = StateVector::random(ens.n_qubits, rng)?;
        let u = ens.sample(rng)?;
        terms.push(sample_term(&sigma, &u, spec, i, j)?);
    }
    let t = trials as f64;
    let mean = terms.iter().sum::<C64>() / t;
    let var_re = terms.iter().map(|z| (z.re - mean.re).powi(2)).sum::<f64>() / (t - 1.0);
    let var_im = terms.iter().map(|z| (z.im - mean.im).powi(2)).sum::<f64>() / (t - 1.0);
    Ok(ComplexEstimate {
        mean,
        stderr_re: (var_re / t).sqrt(),
        stderr_im: (var_im / t).sqrt(),
    })
}

const SAMPLE_MAGIC: &[u8; 4] = b"QCSM";
const SAMPLE_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    /// Ensemble class index.
    pub label: u8,
    /// Row-major `(i, j)` entries, `N^2` of them.
    pub entries: Vec<C64>,
}

/// Contents of a `QCSM` sample file.
///
/// Layout (little-endian): `"QCSM"`, version `u16 = 1`, `n_qubits u8`,
/// correlator id `u8`, `batch_m u16`, `count u32`, then `count` records of a
/// `u8` label followed by `N^2` `(re, im)` pairs of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFile {
    pub n_qubits: u8,
    pub correlator_id: u8,
    pub batch_m: u16,
    pub records: Vec<SampleRecord>,
}

impl SampleFile {
    pub fn new(n_qubits: usize, correlator: &CorrelatorSpec, batch_m: usize) -> Result<Self> {
        let n_qubits = u8::try_from(n_qubits)
            .map_err(|_| Error::Argument(format!("{n_qubits} qubits do not fit the QCSM header")))?;
        let correlator_id = correlator
            .catalog_id()
            .ok_or_else(|| Error::Lookup(format!("{} has no catalog id", correlator.name)))?;
        let batch_m = u16::try_from(batch_m)
            .map_err(|_| Error::Argument(format!("batch_m {batch_m} does not fit the QCSM header")))?;
        Ok(Self { n_qubits, correlator_id, batch_m, records: Vec::new() })
    }

    pub fn correlator(&self) -> Result<CorrelatorSpec> {
        catalog_by_id(self.correlator_id)
    }

    pub fn push(&mut self, label: u8, matrix: &SampleMatrix) -> Result<()> {
        if matrix.n_qubits != self.n_qubits as usize {
            return Err(Error::Shape(format!(
                "{}-qubit sample in a {}-qubit file",
                matrix.n_qubits, self.n_qubits
            )));
        }
        self.records.push(SampleRecord { label, entries: matrix.entries.clone() });
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n2 = (self.n_qubits as usize).pow(2);
        let mut out = Vec::with_capacity(14 + self.records.len() * (1 + 16 * n2));
        out.extend_from_slice(SAMPLE_MAGIC);
        out.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
        out.push(self.n_qubits);
        out.push(self.correlator_id);
        out.extend_from_slice(&self.batch_m.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for record in &self.records {
            out.push(record.label);
            for z in &record.entries {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(SAMPLE_MAGIC)?;
        let version = r.u16("version")?;
        if version != SAMPLE_VERSION {
            return Err(Error::Format { offset: 4, reason: format!("unsupported version {version}") });
        }
        let n_qubits = r.u8("n_qubits")?;
        let correlator_id = r.u8("correlator id")?;
        if correlator_id as usize >= CATALOG.len() {
            return Err(Error::Format { offset: 7, reason: format!("unknown correlator id {correlator_id}") });
        }
        let batch_m = r.u16("batch_m")?;
        let count = r.u32("count")?;
        let n2 = (n_qubits as usize).pow(2);
        let mut records = Vec::with_capacity((count as usize).min(r.remaining()));
        for index in 0..count {
            let label = r.u8(&format!("label of record {index}"))?;
            let mut entries = Vec::with_capacity(n2);
            for _ in 0..n2 {
                let re = r.f64(&format!("record {index}"))?;
                let im = r.f64(&format!("record {index}"))?;
                entries.push(C64::new(re, im));
            }
            records.push(SampleRecord { label, entries });
        }
        r.finish()?;
        Ok(Self { n_qubits, correlator_id, batch_m, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleSpec;
    use crate::quantum::{DenseUnitary, PauliString};
    use crate::seed::rng_from;

    const ONE: C64 = C64::new(1.0, 0.0);

    #[test]
    fn catalog_entries() {
        use PauliLabel::*;
        assert_eq!(catalog("xyxy").unwrap().form, CorrelatorForm::Otoc4 { a: X, b: Y, c: X, d: Y });
        assert_eq!(catalog("xxyy").unwrap().form, CorrelatorForm::Otoc4 { a: X, b: X, c: Y, d: Y });
        assert_eq!(catalog("xy2pt").unwrap().form, CorrelatorForm::TwoPoint { a: X, b: Y });
        assert_eq!(catalog("zz2pt").unwrap().form, CorrelatorForm::TwoPoint { a: Z, b: Z });
        assert!(matches!(catalog("qqqq"), Err(Error::Lookup(_))));
        assert!(CorrelatorSpec::new("bad", CorrelatorForm::TwoPoint { a: I, b: X }).is_err());
        for (id, name) in CATALOG.iter().enumerate() {
            assert_eq!(catalog_by_id(id as u8).unwrap().name, *name);
        }
    }

    #[test]
    fn identity_unitary_terms() {
        let mut rng = rng_from(1);
        let n = 3;
        let sigma = StateVector::random(n, &mut rng).unwrap();
        let id = UnitaryRep::Pauli(PauliString::identity(n));
        let xyxy = catalog("xyxy").unwrap();
        for i in 0..n {
            for j in 0..n {
                let t = sample_term(&sigma, &id, &xyxy, i, j).unwrap();
                let expected = if i == j { -ONE } else { ONE };
                assert!((t - expected).norm() < 1e-12, "({i},{j}) {t}");
            }
        }
        let zz = catalog("zz2pt").unwrap();
        let zero = StateVector::basis(n, 0).unwrap();
        assert!((sample_term(&zero, &id, &zz, 1, 1).unwrap() - ONE).norm() < 1e-15);
        let dense_id = UnitaryRep::Dense(DenseUnitary::identity(n).unwrap());
        assert!((sample_term(&sigma, &dense_id, &zz, 2, 2).unwrap() - ONE).norm() < 1e-12);
    }

    #[test]
    fn term_index_errors() {
        let mut rng = rng_from(2);
        let sigma = StateVector::random(2, &mut rng).unwrap();
        let id = UnitaryRep::Pauli(PauliString::identity(2));
        let spec = catalog("xy2pt").unwrap();
        assert!(matches!(sample_term(&sigma, &id, &spec, 2, 0), Err(Error::Index(_))));
        let wrong = UnitaryRep::Pauli(PauliString::identity(3));
        assert!(matches!(sample_term(&sigma, &wrong, &spec, 0, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn batched_terms_match_single_terms() {
        let mut rng = rng_from(3);
        for n in [2, 4] {
            for ens in [
                EnsembleSpec::pauli(n).unwrap(),
                EnsembleSpec::haar(n).unwrap(),
                EnsembleSpec::brickwork(n, 3).unwrap(),
            ] {
                let sigma = StateVector::random(n, &mut rng).unwrap();
                let u = ens.sample(&mut rng).unwrap();
                for name in CATALOG {
                    let spec = catalog(name).unwrap();
                    let batched = term_matrix(&sigma, &u, &spec).unwrap();
                    for i in 0..n {
                        for j in 0..n {
                            let single = sample_term(&sigma, &u, &spec, i, j).unwrap();
                            assert!((batched[i * n + j] - single).norm() < 1e-12, "{name} {i} {j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pauli_xyxy_is_two_valued() {
        for seed in 0..20 {
            let m = 1 + (seed as usize % 5);
            let ens = EnsembleSpec::pauli(3).unwrap();
            let s = sample_matrix(&catalog("xyxy").unwrap(), &ens, m, seed, PairSharing::Shared).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { -(m as f64) } else { m as f64 };
                    assert!((s.get(i, j) - C64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sample_matrix_bounds_and_determinism() {
        let ens = EnsembleSpec::haar(4).unwrap();
        let spec = catalog("xxyy").unwrap();
        let a = sample_matrix(&spec, &ens, 1, 7, PairSharing::Shared).unwrap();
        assert!(a.max_abs() <= 1.0 + 1e-9);
        let b = sample_matrix(&spec, &ens, 1, 7, PairSharing::Shared).unwrap();
        assert_eq!(a, b);
        let c = sample_matrix(&spec, &ens, 3, 7, PairSharing::PerPixel).unwrap();
        assert!(c.max_abs() <= 3.0 + 1e-8);
        assert!(sample_matrix(&spec, &ens, 0, 7, PairSharing::Shared).is_err());
    }

    #[test]
    fn ensemble_average_pauli_xyxy_is_exactly_one() {
        let mut rng = rng_from(4);
        let est = ensemble_average(&catalog("xyxy").unwrap(), &EnsembleSpec::pauli(4).unwrap(), 0, 2, 50, &mut rng).unwrap();
        assert!((est.mean - ONE).norm() < 1e-12);
        assert!(est.stderr() < 1e-12);
        assert!(ensemble_average(&catalog("xyxy").unwrap(), &EnsembleSpec::pauli(4).unwrap(), 0, 2, 1, &mut rng).is_err());
    }

    #[test]
    fn sample_file_round_trip_and_truncation() {
        let ens = EnsembleSpec::haar(2).unwrap();
        let spec = catalog("xy2pt").unwrap();
        let mut file = SampleFile::new(2, &spec, 5).unwrap();
        for (label, seed) in [(0u8, 1u64), (1, 2)] {
            file.push(label, &sample_matrix(&spec, &ens, 5, seed, PairSharing::Shared).unwrap()).unwrap();
        }
        let bytes = file.to_bytes();
        assert_eq!(&bytes[..4], b"QCSM");
        assert_eq!(bytes.len(), 14 + 2 * (1 + 16 * 4));
        assert_eq!(SampleFile::from_bytes(&bytes).unwrap(), file);

        match SampleFile::from_bytes(&bytes[..bytes.len() - 3]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 14 + 65 + 1 + 16 * 3 + 8),
            other => panic!("expected format error, got {other:?}"),
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(SampleFile::from_bytes(&bad), Err(Error::Format { offset: 0, .. })));
    }
}

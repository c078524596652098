//! Pure-state linear algebra on N qubits.
//!
//! Site 0 is the most significant bit of a basis index, so on two qubits
//! `|01>` has index 1 and a flip on site 1 toggles bit `1 << 0`.

use std::fmt;

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Largest register a dense state vector may describe (16 GiB of amplitudes).
pub const MAX_STATE_QUBITS: usize = 30;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Hilbert-space dimension `2^n`, or a capacity error.
pub fn dimension(n_qubits: usize) -> Result<usize> {
    if n_qubits == 0 {
        return Err(Error::Argument("n_qubits must be at least 1".into()));
    }
    if n_qubits > MAX_STATE_QUBITS {
        return Err(Error::Capacity(format!(
            "{n_qubits} qubits exceeds the dense limit of {MAX_STATE_QUBITS}"
        )));
    }
    let dim = 1usize
        .checked_shl(n_qubits as u32)
        .ok_or_else(|| Error::Capacity(format!("2^{n_qubits} overflows usize")))?;
    dim.checked_mul(std::mem::size_of::<C64>())
        .filter(|&bytes| bytes <= isize::MAX as usize)
        .ok_or_else(|| Error::Capacity(format!("2^{n_qubits} amplitudes do not fit in memory")))?;
    Ok(dim)
}

/// Draw one standard complex normal (unit variance split across re/im).
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 4] = [PauliLabel::I, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(PauliLabel::I),
            'X' => Some(PauliLabel::X),
            'Y' => Some(PauliLabel::Y),
            'Z' => Some(PauliLabel::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLabel::I => 'I',
            PauliLabel::X => 'X',
            PauliLabel::Y => 'Y',
            PauliLabel::Z => 'Z',
        }
    }

    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [C64; 4] {
        match self {
            PauliLabel::I => [ONE, ZERO, ZERO, ONE],
            PauliLabel::X => [ZERO, ONE, ONE, ZERO],
            PauliLabel::Y => [ZERO, -I, I, ZERO],
            PauliLabel::Z => [ONE, ZERO, ZERO, -ONE],
        }
    }

    fn flips(self) -> bool {
        matches!(self, PauliLabel::X | PauliLabel::Y)
    }

    fn phases(self) -> bool {
        matches!(self, PauliLabel::Y | PauliLabel::Z)
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Tensor product of single-site Paulis with no global phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    labels: Vec<PauliLabel>,
}

/// Bit-mask form of a Pauli string: `P|k> = i^y (-1)^{|k & z|} |k ^ x>`.
#[derive(Clone, Copy, Debug)]
struct PauliMasks {
    x: usize,
    z: usize,
    y_count: u32,
}

impl PauliString {
    pub fn new(labels: Vec<PauliLabel>) -> Self {
        Self { labels }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(vec![PauliLabel::I; n_qubits])
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars().map(PauliLabel::from_char).collect::<Option<Vec<_>>>().map(Self::new)
    }

    /// Lexicographic index into the `4^n` strings, site 0 most significant.
    pub fn from_index(n_qubits: usize, mut index: usize) -> Self {
        let mut labels = vec![PauliLabel::I; n_qubits];
        for slot in labels.iter_mut().rev() {
            *slot = PauliLabel::ALL[index % 4];
            index /= 4;
        }
        Self::new(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[PauliLabel] {
        &self.labels
    }

    pub fn is_identity(&self) -> bool {
        self.labels.iter().all(|&l| l == PauliLabel::I)
    }

    fn masks(&self) -> PauliMasks {
        let n = self.labels.len();
        let mut masks = PauliMasks { x: 0, z: 0, y_count: 0 };
        for (site, &label) in self.labels.iter().enumerate() {
            let bit = 1usize << (n - 1 - site);
            if label.flips() {
                masks.x |= bit;
            }
            if label.phases() {
                masks.z |= bit;
            }
            if label == PauliLabel::Y {
                masks.y_count += 1;
            }
        }
        masks
    }

    /// `tr(P Q)` for two phase-free strings: `2^n` when equal, else 0.
    pub fn trace_product(&self, other: &PauliString) -> C64 {
        if self.labels == other.labels {
            C64::new((1u64 << self.len()) as f64, 0.0)
        } else {
            ZERO
        }
    }

    pub fn to_dense(&self) -> Result<DenseUnitary> {
        let n = self.len();
        let dim = dimension(n)?;
        let PauliMasks { x, z, y_count } = self.masks();
        let global = I.powu(y_count);
        let mut entries = vec![ZERO; dim * dim];
        for col in 0..dim {
            let row = col ^ x;
            let sign = if (col & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            entries[row * dim + col] = global * sign;
        }
        Ok(DenseUnitary { n_qubits: n, entries })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for label in &self.labels {
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes; the caller is responsible for normalisation.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        if amplitudes.len() != dim {
            return Err(Error::Shape(format!(
                "{} amplitudes for {n_qubits} qubits (expected {dim})",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Argument("non-finite amplitude".into()));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        if index >= dim {
            return Err(Error::Index(format!("basis index {index} >= {dim}")));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { n_qubits, amplitudes })
    }

    /// Haar-random pure state: i.i.d. complex normals, then normalised.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        let mut amplitudes: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_pauli(&self, site: usize, label: PauliLabel) -> Result<Self> {
        let mut out = self.clone();
        out.apply_pauli_in_place(site, label)?;
        Ok(out)
    }

    pub fn apply_pauli_in_place(&mut self, site: usize, label: PauliLabel) -> Result<()> {
        if site >= self.n_qubits {
            return Err(Error::Index(format!("site {site} on {} qubits", self.n_qubits)));
        }
        pauli_on_site(&mut self.amplitudes, self.n_qubits, site, label);
        Ok(())
    }

    pub fn apply_pauli_string(&self, p: &PauliString) -> Result<Self> {
        let mut out = self.clone();
        out.apply_pauli_string_in_place(p)?;
        Ok(out)
    }

    pub fn apply_pauli_string_in_place(&mut self, p: &PauliString) -> Result<()> {
        if p.len() != self.n_qubits {
            return Err(Error::Shape(format!(
                "Pauli string of length {} on {} qubits",
                p.len(),
                self.n_qubits
            )));
        }
        pauli_string_on(&mut self.amplitudes, p);
        Ok(())
    }

    pub fn apply_dense(&self, u: &DenseUnitary) -> Result<Self> {
        self.check_dim(u)?;
        let mut out = vec![ZERO; self.dim()];
        u.mul_vec(&self.amplitudes, &mut out);
        Ok(Self { n_qubits: self.n_qubits, amplitudes: out })
    }

    /// `U† psi` without materialising the adjoint.
    pub fn apply_dense_adjoint(&self, u: &DenseUnitary) -> Result<Self> {
        self.check_dim(u)?;
        let mut out = vec![ZERO; self.dim()];
        u.adjoint_mul_vec(&self.amplitudes, &mut out);
        Ok(Self { n_qubits: self.n_qubits, amplitudes: out })
    }

    fn check_dim(&self, u: &DenseUnitary) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "{}x{} unitary on a state of dimension {}",
                u.dim(),
                u.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!(
                "inner product of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(inner_slices(&self.amplitudes, &other.amplitudes))
    }
}

pub(crate) fn inner_slices(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn pauli_on_site(amps: &mut [C64], n_qubits: usize, site: usize, label: PauliLabel) {
    let bit = 1usize << (n_qubits - 1 - site);
    match label {
        PauliLabel::I => {}
        PauliLabel::Z => {
            for (k, a) in amps.iter_mut().enumerate() {
                if k & bit != 0 {
                    *a = -*a;
                }
            }
        }
        PauliLabel::X | PauliLabel::Y => {
            for k in 0..amps.len() {
                if k & bit != 0 {
                    continue;
                }
                let (lo, hi) = (amps[k], amps[k | bit]);
                if label == PauliLabel::X {
                    amps[k] = hi;
                    amps[k | bit] = lo;
                } else {
                    // Y|0> = i|1>, Y|1> = -i|0>
                    amps[k] = -I * hi;
                    amps[k | bit] = I * lo;
                }
            }
        }
    }
}

/// Applies the whole string in one pass using `Y = iXZ` per site.
pub(crate) fn pauli_string_on(amps: &mut [C64], p: &PauliString) {
    if p.is_identity() {
        return;
    }
    let PauliMasks { x, z, y_count } = p.masks();
    let global = I.powu(y_count);
    let phase = |k: usize| {
        if (k & z).count_ones() % 2 == 1 {
            -global
        } else {
            global
        }
    };
    if x == 0 {
        for (k, a) in amps.iter_mut().enumerate() {
            *a *= phase(k);
        }
        return;
    }
    // Pair k with k ^ x; visit each pair once from the member whose top
    // flipped bit is clear.
    let top = 1usize << (usize::BITS - 1 - x.leading_zeros());
    for k in 0..amps.len() {
        if k & top != 0 {
            continue;
        }
        let partner = k ^ x;
        let (a, b) = (amps[k], amps[partner]);
        amps[partner] = phase(k) * a;
        amps[k] = phase(partner) * b;
    }
}

/// Square unitary stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    n_qubits: usize,
    entries: Vec<C64>,
}

impl DenseUnitary {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        let mut entries = vec![ZERO; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = ONE;
        }
        Ok(Self { n_qubits, entries })
    }

    /// Wraps row-major entries after checking `U U† = I` to 1e-8.
    pub fn from_entries(n_qubits: usize, entries: Vec<C64>) -> Result<Self> {
        let u = Self::from_entries_unchecked(n_qubits, entries)?;
        let err = u.unitarity_error();
        if err > 1e-8 {
            return Err(Error::Argument(format!("matrix is not unitary (||UU^+ - I||_F = {err:e})")));
        }
        Ok(u)
    }

    pub(crate) fn from_entries_unchecked(n_qubits: usize, entries: Vec<C64>) -> Result<Self> {
        let dim = dimension(n_qubits)?;
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim() + col]
    }

    pub fn adjoint(&self) -> Self {
        let dim = self.dim();
        let mut entries = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                entries[c * dim + r] = self.entries[r * dim + c].conj();
            }
        }
        Self { n_qubits: self.n_qubits, entries }
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|k| self.entries[k * dim + k]).sum()
    }

    pub fn matmul(&self, rhs: &DenseUnitary) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::Shape(format!("{} vs {}", self.dim(), rhs.dim())));
        }
        let dim = self.dim();
        let mut entries = vec![ZERO; dim * dim];
        matmul(
            MatMut::from_row_major_slice_mut(&mut entries, dim, dim),
            Accum::Replace,
            self.as_mat(),
            rhs.as_mat(),
            ONE,
            Par::Seq,
        );
        Ok(Self { n_qubits: self.n_qubits, entries })
    }

    /// Kronecker product `self ⊗ rhs`; `self` occupies the leading sites.
    pub fn kron(&self, rhs: &DenseUnitary) -> Result<Self> {
        let n = self.n_qubits + rhs.n_qubits;
        let dim = dimension(n)?;
        let (da, db) = (self.dim(), rhs.dim());
        let mut entries = vec![ZERO; dim * dim];
        for ar in 0..da {
            for ac in 0..da {
                let a = self.entries[ar * da + ac];
                if a == ZERO {
                    continue;
                }
                for br in 0..db {
                    for bc in 0..db {
                        entries[(ar * db + br) * dim + ac * db + bc] = a * rhs.entries[br * db + bc];
                    }
                }
            }
        }
        Ok(Self { n_qubits: n, entries })
    }

    /// Frobenius norm of `U U† − I`.
    pub fn unitarity_error(&self) -> f64 {
        let dim = self.dim();
        let mut product = vec![ZERO; dim * dim];
        matmul(
            MatMut::from_row_major_slice_mut(&mut product, dim, dim),
            Accum::Replace,
            self.as_mat(),
            self.as_mat().adjoint(),
            ONE,
            Par::Seq,
        );
        for k in 0..dim {
            product[k * dim + k] -= ONE;
        }
        product.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn as_mat(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.entries, self.dim(), self.dim())
    }

    pub(crate) fn mul_vec(&self, x: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        for (row, o) in self.entries.chunks_exact(dim).zip(out.iter_mut()) {
            *o = row.iter().zip(x).fold(ZERO, |acc, (u, v)| acc + u * v);
        }
    }

    pub(crate) fn adjoint_mul_vec(&self, x: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|o| *o = ZERO);
        for (row, &xr) in self.entries.chunks_exact(dim).zip(x) {
            for (o, u) in out.iter_mut().zip(row) {
                *o += u.conj() * xr;
            }
        }
    }

    /// Applies `U` (or `U†`) to `count` column vectors stored back to back.
    pub(crate) fn apply_block(&self, adjoint: bool, block: &[C64], count: usize) -> Vec<C64> {
        let dim = self.dim();
        debug_assert_eq!(block.len(), dim * count);
        let mut out = vec![ZERO; dim * count];
        let rhs = MatRef::from_column_major_slice(block, dim, count);
        let dst = MatMut::from_column_major_slice_mut(&mut out, dim, count);
        if adjoint {
            matmul(dst, Accum::Replace, self.as_mat().adjoint(), rhs, ONE, Par::Seq);
        } else {
            matmul(dst, Accum::Replace, self.as_mat(), rhs, ONE, Par::Seq);
        }
        out
    }
}

/// Density matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        Self::from_pure_amplitudes(psi.amplitudes())
    }

    pub(crate) fn from_pure_amplitudes(amps: &[C64]) -> Self {
        let dim = amps.len();
        let mut entries = vec![ZERO; dim * dim];
        for (r, a) in amps.iter().enumerate() {
            for (c, b) in amps.iter().enumerate() {
                entries[r * dim + c] = a * b.conj();
            }
        }
        Self { dim, entries }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = C64::new(1.0 / dim as f64, 0.0);
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.entries[k * self.dim + k]).sum()
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        frobenius_distance(&self.entries, &other.entries)
    }

    /// Checks Hermiticity and unit trace to 1e-10 and eigenvalues ≥ −1e-9.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim;
        for r in 0..dim {
            for c in 0..=r {
                let gap = (self.entries[r * dim + c] - self.entries[c * dim + r].conj()).norm();
                if gap > 1e-10 {
                    return Err(Error::Validation(format!("not Hermitian at ({r},{c}): {gap:e}")));
                }
            }
        }
        let trace = self.trace();
        if (trace - ONE).norm() > 1e-10 {
            return Err(Error::Validation(format!("trace {trace} != 1")));
        }
        let mat = MatRef::from_row_major_slice(&self.entries, dim, dim);
        let eigenvalues = mat
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Validation(format!("eigenvalue solver failed: {e:?}")))?;
        if let Some(min) = eigenvalues.iter().copied().reduce(f64::min) {
            if min < -1e-9 {
                return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn frobenius_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

//! Operators on the `2^N`-dimensional spin Hilbert space.
//!
//! Basis convention: site 1 is the leftmost (most significant) tensor factor
//! and each site is ordered `(|up>, |down>)`, so `Z = diag(+1, -1)`. An up
//! spin is an occupied fermion; the all-down ket `|0>_N` is the vacuum and
//! has basis index `2^N - 1`.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ChainSpec;
use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest chain stored densely; longer chains use sparse storage.
pub const DENSE_MAX_SITES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteOp {
    X,
    Y,
    Z,
    /// `|up><down|`
    Plus,
    /// `|down><up|`
    Minus,
}

impl SiteOp {
    pub fn matrix(self) -> Matrix2<Complex64> {
        match self {
            SiteOp::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
            SiteOp::Y => Matrix2::new(ZERO, -I, I, ZERO),
            SiteOp::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
            SiteOp::Plus => Matrix2::new(ZERO, ONE, ZERO, ZERO),
            SiteOp::Minus => Matrix2::new(ZERO, ZERO, ONE, ZERO),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Sparse,
}

impl StorageKind {
    pub fn for_sites(n: usize) -> Self {
        if n <= DENSE_MAX_SITES {
            StorageKind::Dense
        } else {
            StorageKind::Sparse
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<Complex64>),
    Sparse(CsrMatrix),
}

/// Square complex operator with a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    storage: Storage,
    label: String,
}

impl OperatorMatrix {
    pub fn new(storage: Storage, label: impl Into<String>) -> Result<Self> {
        let (r, c) = match &storage {
            Storage::Dense(m) => (m.nrows(), m.ncols()),
            Storage::Sparse(m) => (m.nrows(), m.ncols()),
        };
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        if !r.is_power_of_two() {
            return Err(Error::InvalidSpec(format!("operator dimension {r} is not a power of two")));
        }
        Ok(OperatorMatrix { storage, label: label.into() })
    }

    pub fn dense(m: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        Self::new(Storage::Dense(m), label)
    }

    pub fn sparse(m: CsrMatrix, label: impl Into<String>) -> Result<Self> {
        Self::new(Storage::Sparse(m), label)
    }

    pub fn zeros(dim: usize, kind: StorageKind) -> Self {
        let storage = match kind {
            StorageKind::Dense => Storage::Dense(DMatrix::zeros(dim, dim)),
            StorageKind::Sparse => Storage::Sparse(CsrMatrix::zeros(dim, dim)),
        };
        OperatorMatrix { storage, label: "0".into() }
    }

    pub fn identity(dim: usize, kind: StorageKind) -> Self {
        let storage = match kind {
            StorageKind::Dense => Storage::Dense(DMatrix::identity(dim, dim)),
            StorageKind::Sparse => Storage::Sparse(CsrMatrix::identity(dim)),
        };
        OperatorMatrix { storage, label: "I".into() }
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Sparse(m) => m.nrows(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse(_) => StorageKind::Sparse,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    pub fn into_kind(self, kind: StorageKind) -> Self {
        let storage = match (self.storage, kind) {
            (Storage::Dense(m), StorageKind::Sparse) => Storage::Sparse(CsrMatrix::from_dense(&m)),
            (Storage::Sparse(m), StorageKind::Dense) => Storage::Dense(m.to_dense()),
            (s, _) => s,
        };
        OperatorMatrix { storage, label: self.label }
    }

    fn map(&self, dense: impl Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>, sparse: impl Fn(&CsrMatrix) -> CsrMatrix) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(dense(m)),
            Storage::Sparse(m) => Storage::Sparse(sparse(m)),
        };
        OperatorMatrix { storage, label: self.label.clone() }
    }

    pub fn adjoint(&self) -> Self {
        self.map(|m| m.adjoint(), |m| m.adjoint()).with_label(format!("({})^dag", self.label))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|m| m * s, |m| m.scale(s))
    }

    /// Product `self * other`; dense only when both factors are dense.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            _ => Storage::Sparse(self.to_csr().matmul(&other.to_csr())),
        };
        OperatorMatrix { storage, label: format!("{} {}", self.label, other.label) }
    }

    /// `self + s * other`, keeping the storage kind of `self`.
    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Self {
        assert_eq!(self.dim(), other.dim());
        let storage = match &self.storage {
            Storage::Dense(a) => Storage::Dense(a + other.to_dense() * s),
            Storage::Sparse(a) => Storage::Sparse(a.add_scaled(&other.to_csr(), s)),
        };
        OperatorMatrix { storage, label: self.label.clone() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, ONE)
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim(), v.dim());
        let amplitudes = match &self.storage {
            Storage::Dense(m) => m * &v.amplitudes,
            Storage::Sparse(m) => DVector::from_vec(m.mul_vec(v.amplitudes.as_slice())),
        };
        StateVector { amplitudes }
    }

    /// `max |A - A^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Entrywise max-norm distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_csr().add_scaled(&other.to_csr(), -ONE).max_abs()
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).add_scaled(&other.mul(self), -ONE)
    }

    /// Anticommutator `{self, other}`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.mul(other).add(&other.mul(self))
    }
}

/// Normalized (or not) ket on the spin Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        StateVector { amplitudes }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = ONE;
        StateVector { amplitudes }
    }

    /// `|down down ... down>`, the fermionic vacuum.
    pub fn all_down(n: usize) -> Self {
        Self::basis(1 << n, (1 << n) - 1)
    }

    /// Basis ket from per-site spins, `true` = up, site 1 first.
    pub fn from_spins(spins: &[bool]) -> Self {
        Self::basis(1 << spins.len(), basis_index(spins))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Self {
        StateVector { amplitudes: self.amplitudes.normalize() }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|self><self|`.
    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Basis index of a product state (`true` = up, site 1 most significant).
pub fn basis_index(spins: &[bool]) -> usize {
    spins.iter().fold(0, |acc, &up| (acc << 1) | usize::from(!up))
}

/// Whether site `j` (1-based) is up in basis state `index` of an `n`-site chain.
pub fn site_is_up(index: usize, n: usize, j: usize) -> bool {
    (index >> (n - j)) & 1 == 0
}

fn kron_factors(factors: &[Matrix2<Complex64>], kind: StorageKind) -> Storage {
    match kind {
        StorageKind::Dense => {
            let mut m = DMatrix::from_element(1, 1, ONE);
            for f in factors {
                let f = DMatrix::from_column_slice(2, 2, f.as_slice());
                m = m.kronecker(&f);
            }
            Storage::Dense(m)
        }
        StorageKind::Sparse => {
            let mut m = CsrMatrix::identity(1);
            for f in factors {
                let f = CsrMatrix::from_dense(&DMatrix::from_column_slice(2, 2, f.as_slice()));
                m = m.kron(&f);
            }
            Storage::Sparse(m)
        }
    }
}

/// `which` acting on site `j` of an `n`-site chain.
pub fn site_operator(n: usize, j: usize, which: SiteOp) -> Result<OperatorMatrix> {
    site_operator_with(n, j, which, StorageKind::for_sites(n))
}

pub fn site_operator_with(n: usize, j: usize, which: SiteOp, kind: StorageKind) -> Result<OperatorMatrix> {
    if j == 0 || j > n {
        return Err(Error::InvalidSite { j, n });
    }
    let mut factors = vec![Matrix2::identity(); n];
    factors[j - 1] = which.matrix();
    Ok(OperatorMatrix { storage: kron_factors(&factors, kind), label: format!("{which:?}_{j}") })
}

/// `J sum_j (S+_j S-_{j+1} + S-_j S+_{j+1})` on an open chain.
pub fn chain_hamiltonian(spec: &ChainSpec) -> OperatorMatrix {
    chain_hamiltonian_with(spec, StorageKind::for_sites(spec.n))
}

pub fn chain_hamiltonian_with(spec: &ChainSpec, kind: StorageKind) -> OperatorMatrix {
    let n = spec.n;
    let mut h = OperatorMatrix::zeros(1 << n, kind);
    let mut factors = vec![Matrix2::identity(); n];
    for j in 0..n.saturating_sub(1) {
        for (a, b) in [(SiteOp::Plus, SiteOp::Minus), (SiteOp::Minus, SiteOp::Plus)] {
            factors[j] = a.matrix();
            factors[j + 1] = b.matrix();
            let term = OperatorMatrix { storage: kron_factors(&factors, kind), label: String::new() };
            h = h.add_scaled(&term, Complex64::new(spec.j, 0.0));
        }
        factors[j] = Matrix2::identity();
        factors[j + 1] = Matrix2::identity();
    }
    h.with_label(format!("H_xy(N={}, J={})", n, spec.j))
}

/// Jordan–Wigner annihilator of site `j`: the parity string
/// `prod_{l<j} (-1)^{n_l} = prod_{l<j} (-Z_l)` times `S-_j`.
pub fn jw_site_fermion(spec: &ChainSpec, j: usize) -> Result<OperatorMatrix> {
    jw_site_fermion_with(spec, j, StorageKind::for_sites(spec.n))
}

pub fn jw_site_fermion_with(spec: &ChainSpec, j: usize, kind: StorageKind) -> Result<OperatorMatrix> {
    spec.check_site(j)?;
    let parity = -SiteOp::Z.matrix();
    let factors: Vec<Matrix2<Complex64>> = (1..=spec.n)
        .map(|l| match l.cmp(&j) {
            std::cmp::Ordering::Less => parity,
            std::cmp::Ordering::Equal => SiteOp::Minus.matrix(),
            std::cmp::Ordering::Greater => Matrix2::identity(),
        })
        .collect();
    Ok(OperatorMatrix { storage: kron_factors(&factors, kind), label: format!("c_{j}") })
}

/// Eigenmode annihilator `f_k = sqrt(2/(N+1)) sum_j sin(jk pi/(N+1)) c_j`.
pub fn jw_mode_operator(spec: &ChainSpec, k: usize) -> Result<OperatorMatrix> {
    jw_mode_operator_with(spec, k, StorageKind::for_sites(spec.n))
}

pub fn jw_mode_operator_with(spec: &ChainSpec, k: usize, kind: StorageKind) -> Result<OperatorMatrix> {
    spec.check_mode(k)?;
    let mut f = OperatorMatrix::zeros(spec.dim(), kind);
    for j in 1..=spec.n {
        let c = jw_site_fermion_with(spec, j, kind)?;
        f = f.add_scaled(&c, Complex64::new(spec.mode_amplitude(j, k), 0.0));
    }
    Ok(f.with_label(format!("f_{k}")))
}

/// Single-excitation eigenstate `f_k^dag |0>_N`.
pub fn mode_excitation_state(spec: &ChainSpec, k: usize) -> Result<StateVector> {
    let f = jw_mode_operator(spec, k)?;
    Ok(f.adjoint().apply(&StateVector::all_down(spec.n)))
}

/// Total excitation number `sum_j (Z_j + 1)/2`.
pub fn excitation_number(n: usize, kind: StorageKind) -> OperatorMatrix {
    let dim = 1usize << n;
    let t = (0..dim)
        .map(|i| {
            let ups = (1..=n).filter(|&j| site_is_up(i, n, j)).count();
            (i, i, Complex64::new(ups as f64, 0.0))
        })
        .collect();
    OperatorMatrix { storage: Storage::Sparse(CsrMatrix::from_triplets(dim, dim, t)), label: "N_exc".into() }
        .into_kind(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> ChainSpec {
        ChainSpec::new(n, 1.0).unwrap()
    }

    #[test]
    fn single_site_z() {
        let z = site_operator(1, 1, SiteOp::Z).unwrap().to_dense();
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]));
        assert!(site_operator(2, 3, SiteOp::X).is_err());
        assert!(site_operator(2, 0, SiteOp::X).is_err());
    }

    #[test]
    fn minus_on_second_site() {
        let m = site_operator(2, 2, SiteOp::Minus).unwrap().to_dense();
        let want = DMatrix::<Complex64>::identity(2, 2)
            .kronecker(&DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]));
        assert_eq!(m, want);
    }

    #[test]
    fn ladder_commutator_is_z() {
        for n in 1..=4 {
            for j in 1..=n {
                let p = site_operator(n, j, SiteOp::Plus).unwrap();
                let m = site_operator(n, j, SiteOp::Minus).unwrap();
                let z = site_operator(n, j, SiteOp::Z).unwrap();
                assert!(p.commutator(&m).max_abs_diff(&z) < 1e-14);
            }
        }
    }

    #[test]
    fn two_site_hamiltonian_block() {
        let h = chain_hamiltonian(&spec(2)).to_dense();
        // single-excitation kets |ud> = 1, |du> = 2
        assert_eq!(h[(1, 2)], ONE);
        assert_eq!(h[(2, 1)], ONE);
        assert_eq!(h[(1, 1)], ZERO);
    }

    #[test]
    fn vacuum_is_zero_energy() {
        for n in 1..=6 {
            let v = StateVector::all_down(n);
            assert!(chain_hamiltonian(&spec(n)).apply(&v).norm() < 1e-15);
        }
    }

    #[test]
    fn single_mode_chain() {
        let f = jw_mode_operator(&spec(1), 1).unwrap();
        let m = site_operator(1, 1, SiteOp::Minus).unwrap();
        assert!(f.max_abs_diff(&m) < 1e-15);
        let up = mode_excitation_state(&spec(1), 1).unwrap();
        assert!((up.amplitudes[0] - ONE).norm() < 1e-15);
        assert!(jw_mode_operator(&spec(3), 4).is_err());
    }

    #[test]
    fn dense_and_sparse_paths_agree() {
        for n in [3, 5] {
            let s = spec(n);
            let hd = chain_hamiltonian_with(&s, StorageKind::Dense);
            let hs = chain_hamiltonian_with(&s, StorageKind::Sparse);
            assert!(hd.max_abs_diff(&hs) <= 1e-14);
            for k in 1..=n {
                let a = jw_mode_operator_with(&s, k, StorageKind::Dense).unwrap();
                let b = jw_mode_operator_with(&s, k, StorageKind::Sparse).unwrap();
                assert!(a.max_abs_diff(&b) <= 1e-14);
            }
        }
        let roundtrip = chain_hamiltonian(&spec(4)).into_kind(StorageKind::Sparse).into_kind(StorageKind::Dense);
        assert_eq!(roundtrip, chain_hamiltonian(&spec(4)).with_label(roundtrip.label().to_string()));
    }

    #[test]
    fn storage_threshold() {
        assert_eq!(chain_hamiltonian(&spec(6)).kind(), StorageKind::Dense);
        assert_eq!(chain_hamiltonian(&spec(7)).kind(), StorageKind::Sparse);
    }
}

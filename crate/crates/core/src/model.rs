//! Chain parameters, the quadratic coupling matrix and its diagonalization.
//!
//! Mode indices are 1-based everywhere in the public interface: mode `k`
//! of an `N`-site chain has `k` in `1..=N`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nearest-neighbour isotropic XY chain with `n` spins and hopping `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub n: usize,
    pub j: f64,
}

impl ChainSpec {
    pub fn new(n: usize, j: f64) -> Result<Self> {
        let spec = ChainSpec { n, j };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("chain needs at least one spin".into()));
        }
        if !(self.j > 0.0) || !self.j.is_finite() {
            return Err(Error::InvalidSpec(format!("J must be positive, got {}", self.j)));
        }
        Ok(())
    }

    /// Hilbert-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn check_mode(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidModeIndex { k, n: self.n });
        }
        Ok(())
    }

    pub fn check_site(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n {
            return Err(Error::InvalidSite { j, n: self.n });
        }
        Ok(())
    }

    /// Closed-form eigenmode frequency `2J cos(k pi / (N+1))`.
    pub fn mode_frequency(&self, k: usize) -> f64 {
        2.0 * self.j * (k as f64 * PI / (self.n as f64 + 1.0)).cos()
    }

    /// Closed-form amplitude of mode `k` on site `j`, `sqrt(2/(N+1)) sin(jk pi/(N+1))`.
    pub fn mode_amplitude(&self, site: usize, k: usize) -> f64 {
        let np1 = self.n as f64 + 1.0;
        (2.0 / np1).sqrt() * ((site * k) as f64 * PI / np1).sin()
    }
}

/// Eigen-decomposition of a [`QuadraticModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    /// Mode frequencies, ordered by mode index.
    pub frequencies: DVector<f64>,
    /// Orthogonal transform whose columns are the mode wavefunctions.
    pub transform: DMatrix<f64>,
}

/// Quadratic hopping model `sum_ij O_i^dag H_ij O_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    coupling: DMatrix<f64>,
    modes: Option<ModeBasis>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl QuadraticModel {
    /// Wraps a coupling matrix with on-site energies on the diagonal.
    pub fn new(coupling: DMatrix<f64>) -> Result<Self> {
        if !coupling.is_square() {
            return Err(Error::DimensionMismatch {
                expected: coupling.nrows(),
                found: coupling.ncols(),
            });
        }
        Ok(QuadraticModel { coupling, modes: None })
    }

    pub fn size(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn modes(&self) -> Option<&ModeBasis> {
        self.modes.as_ref()
    }

    pub fn mode_frequencies(&self) -> Option<&DVector<f64>> {
        self.modes.as_ref().map(|m| &m.frequencies)
    }

    pub fn transform(&self) -> Option<&DMatrix<f64>> {
        self.modes.as_ref().map(|m| &m.transform)
    }

    fn asymmetry(&self) -> f64 {
        let c = &self.coupling;
        (c - c.transpose()).amax()
    }

    /// Orthogonal diagonalization.
    ///
    /// Modes are ordered by decreasing frequency, which for the XY chain is
    /// the order of the mode index `k = 1..N`. Each column of the transform
    /// is signed so that its first non-negligible entry is positive.
    pub fn diagonalize(&self) -> Result<QuadraticModel> {
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::NonSymmetric(asym));
        }
        let n = self.size();
        let eig = SymmetricEigen::new(self.coupling.clone());

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let frequencies = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut transform = DMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(src);
            let sign = v
                .iter()
                .find(|x| x.abs() > 1e-10)
                .map_or(1.0, |x| x.signum());
            transform.set_column(col, &(v * sign));
        }

        Ok(QuadraticModel {
            coupling: self.coupling.clone(),
            modes: Some(ModeBasis { frequencies, transform }),
        })
    }
}

/// Open XY chain coupling: zero diagonal, `J` on the first off-diagonals.
pub fn xy_coupling_matrix(spec: &ChainSpec) -> QuadraticModel {
    let n = spec.n;
    let coupling = DMatrix::from_fn(n, n, |a, b| if a.abs_diff(b) == 1 { spec.j } else { 0.0 });
    QuadraticModel { coupling, modes: None }
}

/// State the reservoir qubits are prepared in before each interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// Prepared in `|e>`: pumps an excitation into the mode.
    Excited,
    /// Prepared in `|g>`: removes excitations from the mode.
    Ground,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::Excited => f.write_str("excited"),
            Polarization::Ground => f.write_str("ground"),
        }
    }
}

/// One engineered reservoir coupled resonantly to eigenmode `mode`.
///
/// `gamma` is the effective rate and the only value the dynamics uses. The
/// microscopic triple (`lambda`, `tau`, `switch_rate`) is optional
/// provenance; when all three are present they must reproduce `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub mode: usize,
    pub polarization: Polarization,
    pub gamma: f64,
    pub tls_frequency: Option<f64>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub switch_rate: Option<f64>,
}

impl ReservoirSpec {
    pub fn new(mode: usize, polarization: Polarization, gamma: f64) -> Self {
        ReservoirSpec {
            mode,
            polarization,
            gamma,
            tls_frequency: None,
            lambda: None,
            tau: None,
            switch_rate: None,
        }
    }

    pub fn pump(mode: usize, gamma: f64) -> Self {
        Self::new(mode, Polarization::Excited, gamma)
    }

    pub fn cool(mode: usize, gamma: f64) -> Self {
        Self::new(mode, Polarization::Ground, gamma)
    }

    /// Builds the reservoir from its microscopic parameters, `gamma = r (lambda tau)^2`.
    pub fn from_microscopic(
        mode: usize,
        polarization: Polarization,
        lambda: f64,
        tau: f64,
        switch_rate: f64,
    ) -> Self {
        ReservoirSpec {
            gamma: switch_rate * (lambda * tau).powi(2),
            lambda: Some(lambda),
            tau: Some(tau),
            switch_rate: Some(switch_rate),
            ..Self::new(mode, polarization, 0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::NegativeRate(self.gamma));
        }
        for v in [self.lambda, self.tau, self.switch_rate].into_iter().flatten() {
            if !(v >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "reservoir on mode {}: microscopic parameters must be non-negative",
                    self.mode
                )));
            }
        }
        if let (Some(l), Some(t), Some(r)) = (self.lambda, self.tau, self.switch_rate) {
            let expected = r * (l * t).powi(2);
            let scale = expected.abs().max(self.gamma.abs()).max(f64::MIN_POSITIVE);
            if (expected - self.gamma).abs() > 1e-9 * scale {
                return Err(Error::InvalidSpec(format!(
                    "reservoir on mode {}: gamma {} inconsistent with r (lambda tau)^2 = {}",
                    self.mode, self.gamma, expected
                )));
            }
        }
        Ok(())
    }
}

/// Site-local natural noise: amplitude damping `kappa` at thermal occupation
/// `nbar`, and dephasing `kappa_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kappa: f64,
    pub kappa_phi: f64,
    pub nbar: f64,
}

impl NoiseSpec {
    pub fn new(kappa: f64, kappa_phi: f64, nbar: f64) -> Result<Self> {
        let spec = NoiseSpec { kappa, kappa_phi, nbar };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.kappa, self.kappa_phi, self.nbar] {
            if !(v >= 0.0) {
                return Err(Error::NegativeRate(v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RwaWarning {
    /// `sqrt(N) lambda` is not at least ten times smaller than `J`.
    CouplingTooStrong { mode: usize, lambda: f64, bound: f64 },
    /// `lambda tau` outside the weak-coupling regime.
    NotWeakCoupling { mode: usize, lambda_tau: f64 },
    DuplicateMode { mode: usize },
}

impl fmt::Display for RwaWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RwaWarning::CouplingTooStrong { mode, lambda, bound } => write!(
                f,
                "mode {mode}: sqrt(N)*lambda = {bound:.4} is not << J (lambda = {lambda})"
            ),
            RwaWarning::NotWeakCoupling { mode, lambda_tau } => {
                write!(f, "mode {mode}: lambda*tau = {lambda_tau} is not << 1")
            }
            RwaWarning::DuplicateMode { mode } => {
                write!(f, "mode {mode} is targeted by more than one reservoir")
            }
        }
    }
}

/// Ratio used for "much less than" in the RWA and weak-coupling checks.
pub const RWA_MARGIN: f64 = 10.0;

/// Checks the bookkeeping assumptions behind the engineered dissipators.
pub fn validate_rwa(spec: &ChainSpec, reservoirs: &[ReservoirSpec]) -> Result<Vec<RwaWarning>> {
    let mut warnings = Vec::new();
    let mut seen = vec![false; spec.n + 1];
    for r in reservoirs {
        spec.check_mode(r.mode)?;
        if std::mem::replace(&mut seen[r.mode], true) {
            warnings.push(RwaWarning::DuplicateMode { mode: r.mode });
        }
        if let Some(lambda) = r.lambda {
            let bound = (spec.n as f64).sqrt() * lambda;
            if bound >= spec.j / RWA_MARGIN {
                warnings.push(RwaWarning::CouplingTooStrong { mode: r.mode, lambda, bound });
            }
            if let Some(tau) = r.tau {
                let lambda_tau = lambda * tau;
                if lambda_tau >= 1.0 / RWA_MARGIN {
                    warnings.push(RwaWarning::NotWeakCoupling { mode: r.mode, lambda_tau });
                }
            }
        }
    }
    Ok(warnings)
}

//! Steady states and time evolution under a [`Liouvillian`].

mod integrate;
mod steady;

pub use integrate::{convergence_time, evolve};
pub use steady::{relative_residual, steady_state, steady_state_from, DIRECT_MAX_DIM};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouvillian::{Liouvillian, Part};
use crate::operators::StateVector;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated before a state is rejected.
pub const PSD_TOL: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::checked(matrix, TRACE_TOL)
    }

    pub(crate) fn checked(matrix: DMatrix<Complex64>, trace_tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let dm = DensityMatrix { matrix };
        let min = dm.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(dm)
    }

    /// Symmetrizes to `(m + m^dag)/2`, rescales to unit trace, then validates.
    pub fn from_raw(matrix: DMatrix<Complex64>) -> Result<Self> {
        let h = hermitian_part(&matrix);
        let tr = h.trace().re;
        if !(tr.abs() > f64::EPSILON) {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        Self::new(h / Complex64::new(tr, 0.0))
    }

    /// Wraps a matrix already known to be a valid state, taking its Hermitian part.
    pub(crate) fn trusted(m: DMatrix<Complex64>) -> Self {
        DensityMatrix { matrix: hermitian_part(&m) }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityMatrix { matrix: psi.normalized().projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { matrix: DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    /// Random full-rank state `G G^dag / Tr(G G^dag)` with Gaussian `G`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix { matrix: hermitian_part(&(m / tr)) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `(1/2) || self - other ||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = hermitian_part(&(&self.matrix - &other.matrix));
        0.5 * SymmetricEigen::new(diff).eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
    }
}

pub(crate) fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SteadyMethod {
    /// Sparse LU on the generator with one row replaced by the trace constraint.
    #[default]
    DirectNullSpace,
    /// Integrate from an initial state until `|L rho|` falls below tolerance.
    TimeMarching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub method: SteadyMethod,
    /// Bound on `|L vec(rho)|_2 / |L|_F` for an accepted steady state.
    pub residual_tol: f64,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
    /// Time-marching horizon; `None` means 50 / (smallest nonzero rate).
    pub max_time: Option<f64>,
    /// Target for `|d vec(rho)/dt|_2` in time marching.
    pub convergence_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SteadyMethod::DirectNullSpace,
            residual_tol: 1e-10,
            ode_rel_tol: 1e-8,
            ode_abs_tol: 1e-10,
            max_time: None,
            convergence_tol: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn time_marching() -> Self {
        SolverOptions { method: SteadyMethod::TimeMarching, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [self.residual_tol, self.ode_rel_tol, self.ode_abs_tol, self.convergence_tol];
        if tols.iter().any(|t| !(*t > 0.0)) || self.max_time.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("solver tolerances and max_time must be positive".into()));
        }
        Ok(())
    }

    /// Resolved time-marching horizon for `l`.
    pub fn horizon(&self, l: &Liouvillian) -> f64 {
        self.max_time.unwrap_or_else(|| 50.0 / min_rate(l).unwrap_or(1.0))
    }
}

/// Smallest nonzero rate named in the generator's parts.
///
/// Thermal excitation `kappa * nbar` is not counted; it can be orders of
/// magnitude below every relaxation channel without setting the time scale.
fn min_rate(l: &Liouvillian) -> Option<f64> {
    l.parts()
        .iter()
        .flat_map(|p| match *p {
            Part::Engineered { gamma, .. } => vec![gamma],
            Part::Dissipator { rate, .. } => vec![rate],
            Part::Natural { kappa, kappa_phi, .. } => vec![kappa, kappa_phi],
            Part::Hamiltonian { .. } => vec![],
        })
        .filter(|r| *r > 0.0)
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 4, 16] {
            let rho = DensityMatrix::random(dim, &mut rng);
            DensityMatrix::new(rho.matrix().clone()).unwrap();
            assert!(rho.min_eigenvalue() > 0.0);
        }
    }

    #[test]
    fn invariants_are_enforced() {
        let bad_trace = DMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ]));
        assert!(DensityMatrix::new(negative).is_err());
        let mut skew = DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        skew[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(skew.clone()).is_err());
        assert!(DensityMatrix::from_raw(skew).is_ok());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let a = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        let b = DensityMatrix::from_pure(&StateVector::basis(2, 1));
        assert!((a.trace_distance(&b) - 1.0).abs() < 1e-14);
        assert!(a.trace_distance(&a) < 1e-14);
    }

    #[test]
    fn options_validation() {
        SolverOptions::default().validate().unwrap();
        let bad = SolverOptions { residual_tol: 0.0, ..SolverOptions::default() };
        assert!(bad.validate().is_err());
    }
}

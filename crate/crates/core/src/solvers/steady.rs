use num_complex::Complex64;

use super::integrate::{gather, invariant_support, scatter, Stepper};
use super::{DensityMatrix, SolverOptions, SteadyMethod};
use crate::error::{Error, Result};
use crate::liouvillian::{devectorize, vectorize, Liouvillian};
use crate::operators::StateVector;
use crate::sparse::{CsrMatrix, LuError, SparseLu};

/// Largest generator the direct solver accepts (`4^6`).
pub const DIRECT_MAX_DIM: usize = 4096;

const REFINEMENT_STEPS: usize = 3;
/// Accepted steps without halving `|L v|` before marching tightens its tolerances.
const STALL_STEPS: usize = 400;
/// Same, as a fraction of the horizon.
const STALL_WINDOWS: f64 = 25.0;
const MIN_REL_TOL: f64 = 1e-13;

/// `|L vec(rho)|_2 / |L|_F`.
pub fn relative_residual(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    let r = l.matrix().mul_vec(&vectorize(rho.matrix()));
    let num = r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let den = l.matrix().frobenius_norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Steady state of `l`; time marching starts from the all-down state.
pub fn steady_state(l: &Liouvillian, opts: &SolverOptions) -> Result<DensityMatrix> {
    steady_state_from(l, opts, None)
}

/// Steady state of `l`. `initial` is only used by time marching.
pub fn steady_state_from(
    l: &Liouvillian,
    opts: &SolverOptions,
    initial: Option<&DensityMatrix>,
) -> Result<DensityMatrix> {
    opts.validate()?;
    let rho = match opts.method {
        SteadyMethod::DirectNullSpace => direct(l)?,
        SteadyMethod::TimeMarching => {
            let start = match initial {
                Some(r) => r.clone(),
                None => DensityMatrix::from_pure(&StateVector::basis(l.hilbert_dim(), l.hilbert_dim() - 1)),
            };
            marching(l, opts, &start)?
        }
    };
    let residual = relative_residual(l, &rho);
    if !(residual <= opts.residual_tol) {
        return Err(Error::NonUniqueSteadyState(format!(
            "residual {residual:e} exceeds {:e}",
            opts.residual_tol
        )));
    }
    Ok(rho)
}

fn direct(l: &Liouvillian) -> Result<DensityMatrix> {
    if l.dim() > DIRECT_MAX_DIM {
        return Err(Error::DirectSolveTooLarge { dim: l.dim(), limit: DIRECT_MAX_DIM });
    }
    let d = l.hilbert_dim();
    let diagonal: Vec<usize> = (0..d).map(|i| i + i * d).collect();
    // populations live in one block; coherences outside it stay zero
    let support = l.matrix().closure(diagonal.iter().copied());
    let sub = l.matrix().principal_submatrix(&support);
    let n = support.len();

    let is_diag: Vec<bool> = support.iter().map(|&g| g % (d + 1) == 0).collect();
    let pivot_row = support.iter().position(|&g| g == 0).expect("diagonal index in support");

    let mut triplets: Vec<(usize, usize, Complex64)> =
        sub.iter().filter(|&(r, _, _)| r != pivot_row).collect();
    triplets.extend(
        (0..n).filter(|&c| is_diag[c]).map(|c| (pivot_row, c, Complex64::new(1.0, 0.0))),
    );
    let system = CsrMatrix::from_triplets(n, n, triplets);

    let singular_tol = 1e-13 * system.max_abs().max(1.0);
    let lu = SparseLu::factor(&system, singular_tol).map_err(|e| match e {
        LuError::Singular { col, pivot } => Error::NonUniqueSteadyState(format!(
            "trace-constrained generator is singular (column {col}, pivot {pivot:e})"
        )),
        other => Error::InvalidSpec(other.to_string()),
    })?;

    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[pivot_row] = Complex64::new(1.0, 0.0);
    let mut x = lu.solve(&rhs);
    for _ in 0..REFINEMENT_STEPS {
        let ax = system.mul_vec(&x);
        let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
    }
    DensityMatrix::from_raw(devectorize(&scatter(&x, &support, l.dim()))?)
}

fn marching(l: &Liouvillian, opts: &SolverOptions, start: &DensityMatrix) -> Result<DensityMatrix> {
    if start.dim() != l.hilbert_dim() {
        return Err(Error::DimensionMismatch { expected: l.hilbert_dim(), found: start.dim() });
    }
    let horizon = opts.horizon(l);
    let v0 = vectorize(start.matrix());
    let support = invariant_support(l, &v0);
    let gen = l.matrix().principal_submatrix(&support);
    let target = opts.convergence_tol.min(0.5 * opts.residual_tol * l.matrix().frobenius_norm());
    let mut stepper = Stepper::new(&gen, gather(&v0, &support), opts.ode_rel_tol, opts.ode_abs_tol);
    // The adaptive controller leaves |L v| at a floor set by the tolerances:
    // tighten them when progress stalls, then fall back to constant steps.
    let window = horizon / STALL_WINDOWS;
    let mut best = stepper.derivative_norm();
    let mut since_best = 0;
    let mut t_best = 0.0;
    while stepper.derivative_norm() >= target {
        if stepper.t >= horizon {
            return Err(Error::NoConvergence { t: stepper.t, residual: stepper.derivative_norm() });
        }
        stepper.step(horizon)?;
        let norm = stepper.derivative_norm();
        if norm < 0.5 * best {
            best = norm;
            since_best = 0;
            t_best = stepper.t;
            continue;
        }
        since_best += 1;
        let unstable = stepper.is_frozen() && norm > 4.0 * best;
        if unstable || (!stepper.is_frozen() && (since_best >= STALL_STEPS || stepper.t - t_best >= window)) {
            if unstable || !stepper.tighten(10.0, MIN_REL_TOL) {
                stepper.freeze(0.5);
            }
            best = norm;
            since_best = 0;
            t_best = stepper.t;
        }
    }
    DensityMatrix::from_raw(devectorize(&scatter(&stepper.y, &support, l.dim()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{dissipator, natural_liouvillian};
    use crate::model::{ChainSpec, NoiseSpec};
    use crate::operators::{site_operator, SiteOp};

    fn qubit_thermal(nbar: f64) -> Liouvillian {
        let spec = ChainSpec::new(1, 1.0).unwrap();
        natural_liouvillian(&spec, &NoiseSpec::new(1.0, 0.0, nbar).unwrap()).unwrap()
    }

    #[test]
    fn pure_decay_to_ground() {
        for opts in [SolverOptions::default(), SolverOptions::time_marching()] {
            let rho = steady_state(&qubit_thermal(0.0), &opts).unwrap();
            assert!((rho.matrix()[(1, 1)].re - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn detailed_balance_population() {
        for nbar in [0.5, 0.1, 2.0] {
            let rho = steady_state(&qubit_thermal(nbar), &SolverOptions::default()).unwrap();
            let pe = rho.matrix()[(0, 0)].re;
            assert!((pe - nbar / (1.0 + 2.0 * nbar)).abs() < 1e-12, "nbar {nbar}: {pe}");
        }
    }

    #[test]
    fn zero_generator_is_not_unique() {
        let l = Liouvillian::zero(2);
        assert!(matches!(steady_state(&l, &SolverOptions::default()), Err(Error::NonUniqueSteadyState(_))));
    }

    #[test]
    fn pure_dephasing_is_not_unique() {
        let l = dissipator(&site_operator(1, 1, SiteOp::Z).unwrap(), 1.0).unwrap();
        assert!(steady_state(&l, &SolverOptions::default()).is_err());
    }

    #[test]
    fn marching_respects_horizon() {
        let opts = SolverOptions { max_time: Some(0.01), ..SolverOptions::time_marching() };
        let start = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        let err = steady_state_from(&qubit_thermal(0.0), &opts, Some(&start)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}

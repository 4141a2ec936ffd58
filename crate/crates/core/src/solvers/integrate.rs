//! Adaptive Dormand–Prince 5(4) integration of `d vec(rho)/dt = L vec(rho)`.

use num_complex::Complex64;

use super::{hermitian_part, DensityMatrix, SolverOptions};
use crate::error::{Error, Result};
use crate::liouvillian::{devectorize, vectorize, Liouvillian};
use crate::metrics::fidelity;
use crate::operators::StateVector;
use crate::sparse::CsrMatrix;

/// Trace drift allowed on evolved states.
const EVOLVE_TRACE_TOL: f64 = 1e-8;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Linear combination `out = y + h * sum(w_i k_i)`.
fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        *o = y[i] + acc * h;
    }
}

/// Explicit adaptive stepper for a constant linear generator.
pub(crate) struct Stepper<'a> {
    gen: &'a CsrMatrix,
    pub y: Vec<Complex64>,
    pub t: f64,
    h: f64,
    /// Step used without error control once set.
    fixed: Option<f64>,
    rtol: f64,
    atol: f64,
    /// `gen * y`, reused across steps (first-same-as-last).
    pub k1: Vec<Complex64>,
    k: [Vec<Complex64>; 6],
    ytmp: Vec<Complex64>,
    ynew: Vec<Complex64>,
    pub steps: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(gen: &'a CsrMatrix, y0: Vec<Complex64>, rtol: f64, atol: f64) -> Self {
        let n = y0.len();
        let k1 = gen.mul_vec(&y0);
        let scale = |v: &[Complex64]| {
            v.iter()
                .zip(&y0)
                .map(|(a, y)| a.norm() / (atol + rtol * y.norm()))
                .fold(0.0, f64::max)
        };
        let d0 = scale(&y0);
        let d1 = scale(&k1);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        Stepper {
            gen,
            y: y0,
            t: 0.0,
            h,
            fixed: None,
            rtol,
            atol,
            k1,
            k: std::array::from_fn(|_| zeros.clone()),
            ytmp: zeros.clone(),
            ynew: zeros,
            steps: 0,
        }
    }

    /// `|gen * y|_2` at the current state.
    pub fn derivative_norm(&self) -> f64 {
        self.k1.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Divides both tolerances by `factor`, stopping at `floor` for the relative one.
    /// Returns false once nothing changed.
    pub fn tighten(&mut self, factor: f64, floor: f64) -> bool {
        if self.rtol <= floor {
            return false;
        }
        let next = (self.rtol / factor).max(floor);
        self.atol *= next / self.rtol;
        self.rtol = next;
        true
    }

    /// Switches to constant steps of `factor` times the current step size.
    ///
    /// Near a fixed point the step map is linear, so a constant step inside
    /// the stability region contracts every decaying component, whereas the
    /// adaptive controller keeps probing the stability boundary.
    pub fn freeze(&mut self, factor: f64) {
        self.fixed = Some(self.fixed.unwrap_or(self.h) * factor);
    }

    pub fn is_frozen(&self) -> bool {
        self.fixed.is_some()
    }

    /// Takes one accepted step, never passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        loop {
            let remaining = t_limit - self.t;
            let natural = self.fixed.unwrap_or(self.h);
            let clipped = natural >= remaining;
            let h = if clipped { remaining } else { natural };
            if h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                if remaining <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                    self.t = t_limit;
                    return Ok(());
                }
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }

            let [k2, k3, k4, k5, k6, k7] = &mut self.k;
            combine(&mut self.ytmp, &self.y, h, &[(A21, &self.k1)]);
            self.gen.mul_vec_into(&self.ytmp, k2);
            combine(&mut self.ytmp, &self.y, h, &[(A31, &self.k1), (A32, k2)]);
            self.gen.mul_vec_into(&self.ytmp, k3);
            combine(&mut self.ytmp, &self.y, h, &[(A41, &self.k1), (A42, k2), (A43, k3)]);
            self.gen.mul_vec_into(&self.ytmp, k4);
            combine(&mut self.ytmp, &self.y, h, &[(A51, &self.k1), (A52, k2), (A53, k3), (A54, k4)]);
            self.gen.mul_vec_into(&self.ytmp, k5);
            combine(
                &mut self.ytmp,
                &self.y,
                h,
                &[(A61, &self.k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            );
            self.gen.mul_vec_into(&self.ytmp, k6);
            combine(
                &mut self.ynew,
                &self.y,
                h,
                &[(B1, &self.k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
            );
            self.gen.mul_vec_into(&self.ynew, k7);

            let mut err = 0.0f64;
            for i in 0..self.y.len() {
                let e = (self.k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let sc = self.atol + self.rtol * self.y[i].norm().max(self.ynew[i].norm());
                err = err.max(e.norm() / sc);
            }
            if self.fixed.is_some() {
                std::mem::swap(&mut self.y, &mut self.ynew);
                std::mem::swap(&mut self.k1, k7);
                self.t = if clipped { t_limit } else { self.t + h };
                self.steps += 1;
                return Ok(());
            }
            if !err.is_finite() {
                self.h *= 0.2;
                continue;
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                std::mem::swap(&mut self.y, &mut self.ynew);
                std::mem::swap(&mut self.k1, k7);
                self.t = if clipped { t_limit } else { self.t + h };
                // a clipped step says nothing about the natural step size
                if !clipped || h * factor > self.h {
                    self.h = h * factor;
                }
                self.steps += 1;
                return Ok(());
            }
            self.h = h * factor.min(1.0);
        }
    }
}

/// Support of `vec(rho)` closed under the generator's sparsity graph.
pub(crate) fn invariant_support(l: &Liouvillian, v: &[Complex64]) -> Vec<usize> {
    let seeds = v.iter().enumerate().filter(|(_, x)| x.norm() > 0.0).map(|(i, _)| i);
    l.matrix().closure(seeds)
}

pub(crate) fn gather(v: &[Complex64], idx: &[usize]) -> Vec<Complex64> {
    idx.iter().map(|&i| v[i]).collect()
}

pub(crate) fn scatter(local: &[Complex64], idx: &[usize], dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (&i, &v) in idx.iter().zip(local) {
        out[i] = v;
    }
    out
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidSpec("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSpec("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evolves `rho0` and returns the state at every grid time.
///
/// Integration runs on the smallest invariant subspace containing the
/// support of `rho0`, which is exact because the generator is block diagonal
/// with respect to it.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(t_grid.len());
    march(l, rho0, t_grid, opts, |_, rho| {
        out.push(rho);
        true
    })?;
    Ok(out)
}

/// Drives the integrator over `t_grid`, handing each state to `visit`
/// until it returns `false`.
fn march(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &SolverOptions,
    mut visit: impl FnMut(f64, DensityMatrix) -> bool,
) -> Result<()> {
    opts.validate()?;
    check_grid(t_grid)?;
    if rho0.dim() != l.hilbert_dim() {
        return Err(Error::DimensionMismatch { expected: l.hilbert_dim(), found: rho0.dim() });
    }
    let v0 = vectorize(rho0.matrix());
    let support = invariant_support(l, &v0);
    let gen = l.matrix().principal_submatrix(&support);
    let mut stepper = Stepper::new(&gen, gather(&v0, &support), opts.ode_rel_tol, opts.ode_abs_tol);
    for &t in t_grid {
        while stepper.t < t {
            stepper.step(t)?;
        }
        let full = scatter(&stepper.y, &support, l.dim());
        let rho = DensityMatrix::checked(hermitian_part(&devectorize(&full)?), EVOLVE_TRACE_TOL)?;
        if !visit(t, rho) {
            break;
        }
    }
    Ok(())
}

/// First grid time at which `fidelity(rho(t), target) >= threshold`, or
/// `f64::INFINITY` if the grid ends first.
pub fn convergence_time(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    target: &StateVector,
    threshold: f64,
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidSpec(format!("threshold {threshold} outside (0, 1)")));
    }
    let mut hit = f64::INFINITY;
    let mut failure = None;
    march(l, rho0, t_grid, opts, |t, rho| match fidelity(&rho, target) {
        Ok(f) if f >= threshold => {
            hit = t;
            false
        }
        Ok(_) => true,
        Err(e) => {
            failure = Some(e);
            false
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(hit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::dissipator;
    use crate::operators::{site_operator, SiteOp};

    fn excited() -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::basis(2, 0))
    }

    #[test]
    fn zero_generator_is_identity_map() {
        let l = Liouvillian::zero(2);
        let states = evolve(&l, &excited(), &[0.0, 1.0, 5.0], &SolverOptions::default()).unwrap();
        assert_eq!(states.len(), 3);
        for s in states {
            assert!(s.trace_distance(&excited()) < 1e-15);
        }
    }

    #[test]
    fn two_level_decay_matches_closed_form() {
        let kappa = 2.5;
        let l = dissipator(&site_operator(1, 1, SiteOp::Minus).unwrap(), kappa).unwrap();
        let grid = [0.0, 0.5 / kappa, 1.0 / kappa];
        let states = evolve(&l, &excited(), &grid, &SolverOptions::default()).unwrap();
        for (t, s) in grid.iter().zip(&states) {
            let pe = s.matrix()[(0, 0)].re;
            assert!((pe - (-kappa * t).exp()).abs() < 1e-6, "t = {t}: {pe}");
            assert!((s.matrix().trace().re - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_grids_are_rejected() {
        let l = Liouvillian::zero(2);
        let o = SolverOptions::default();
        assert!(evolve(&l, &excited(), &[0.5, 1.0], &o).is_err());
        assert!(evolve(&l, &excited(), &[0.0, 1.0, 1.0], &o).is_err());
    }

    #[test]
    fn convergence_time_edge_cases() {
        let l = Liouvillian::zero(2);
        let o = SolverOptions::default();
        let up = StateVector::basis(2, 0);
        let down = StateVector::basis(2, 1);
        let grid = [0.0, 1.0, 2.0];
        assert_eq!(convergence_time(&l, &excited(), &up, 0.99, &grid, &o).unwrap(), 0.0);
        assert_eq!(convergence_time(&l, &excited(), &down, 0.5, &grid, &o).unwrap(), f64::INFINITY);
        assert!(convergence_time(&l, &excited(), &down, 1.0, &grid, &o).is_err());
    }
}

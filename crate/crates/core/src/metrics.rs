//! Figures of merit for chain states.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ChainSpec;
use crate::operators::{jw_mode_operator, SiteOp, StateVector};
use crate::solvers::DensityMatrix;

/// Slack for round-off in expectation values before they are clamped.
pub const CLAMP_TOL: f64 = 1e-10;

/// Eigenvalues of a two-qubit state below this are treated as exact zeros.
const RANK_CUTOFF: f64 = 1e-14;

/// `sqrt(<psi|rho|psi>)` for a pure target; the square root is already
/// applied, so this is the Uhlmann fidelity, not its square.
pub fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: psi.dim() });
    }
    let psi = psi.normalized();
    let overlap = psi.amplitudes.dotc(&(rho.matrix() * &psi.amplitudes)).re;
    if overlap < -CLAMP_TOL {
        return Err(Error::NegativeExpectation(overlap));
    }
    Ok(overlap.clamp(0.0, 1.0).sqrt())
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    rho.matrix().iter().map(|v| v.norm_sqr()).sum()
}

/// Reduced state on the 1-based sites in `keep` (sorted, distinct).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let n = dim.trailing_zeros() as usize;
    if !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    if keep.is_empty() {
        return Err(Error::InvalidSite { j: 0, n });
    }
    for (idx, &j) in keep.iter().enumerate() {
        if j == 0 || j > n || (idx > 0 && keep[idx - 1] >= j) {
            return Err(Error::InvalidSite { j, n });
        }
    }
    let traced: Vec<usize> = (1..=n).filter(|j| !keep.contains(j)).collect();
    // bit position of site j in a basis index
    let bit = |j: usize| n - j;
    let compose = |sites: &[usize], cfg: usize| -> usize {
        let m = sites.len();
        sites.iter().enumerate().fold(0, |acc, (p, &j)| acc | (((cfg >> (m - 1 - p)) & 1) << bit(j)))
    };
    let kdim = 1usize << keep.len();
    let tdim = 1usize << traced.len();
    let kept_idx: Vec<usize> = (0..kdim).map(|c| compose(keep, c)).collect();
    let traced_idx: Vec<usize> = (0..tdim).map(|c| compose(&traced, c)).collect();
    let m = rho.matrix();
    let reduced = DMatrix::from_fn(kdim, kdim, |a, b| {
        traced_idx.iter().map(|&e| m[(kept_idx[a] | e, kept_idx[b] | e)]).sum::<Complex64>()
    });
    Ok(DensityMatrix::trusted(reduced))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho2: &DensityMatrix) -> Result<f64> {
    if rho2.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho2.dim() });
    }
    let y = SiteOp::Y.matrix();
    let yy: Matrix4<Complex64> = y.kronecker(&y);
    let rho = Matrix4::from_iterator(rho2.matrix().iter().copied());

    // With rho = W W^dag, the eigenvalues of rho (YY) conj(rho) (YY) are the
    // squared singular values of W^T (YY) W. Taking singular values directly
    // avoids square roots of round-off sized eigenvalues.
    let eig = SymmetricEigen::new(rho);
    let weights = eig.eigenvalues.map(|p| {
        let p = if p > RANK_CUTOFF { p } else { 0.0 };
        Complex64::new(p.sqrt(), 0.0)
    });
    let w = eig.eigenvectors * Matrix4::from_diagonal(&weights);
    let tau = w.transpose() * yy * w;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Concurrence of the reduced state on sites `(i, j)`.
pub fn pair_concurrence(rho: &DensityMatrix, i: usize, j: usize) -> Result<f64> {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    concurrence(&partial_trace(rho, &[a, b])?)
}

/// Eigenmode occupations `<f_k^dag f_k>` for `k = 1..N`.
pub fn mode_occupations(rho: &DensityMatrix, spec: &ChainSpec) -> Result<Vec<f64>> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho.dim() });
    }
    let m = rho.matrix();
    (1..=spec.n)
        .map(|k| {
            let f = jw_mode_operator(spec, k)?.to_csr();
            let number = f.adjoint().matmul(&f);
            // Tr(A rho) = sum_ij A_ij rho_ji
            let tr: Complex64 = number.iter().map(|(i, j, v)| v * m[(j, i)]).sum();
            Ok(tr.re.clamp(0.0, 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairConcurrence {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// All figures of merit for one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub fidelity: f64,
    pub purity: f64,
    pub concurrence: Option<PairConcurrence>,
    pub mode_occupations: Vec<f64>,
    pub residual: f64,
}

impl MetricRecord {
    pub fn evaluate(
        rho: &DensityMatrix,
        target: &StateVector,
        spec: &ChainSpec,
        pair: Option<(usize, usize)>,
        residual: f64,
    ) -> Result<Self> {
        let concurrence = match pair {
            Some((i, j)) => Some(PairConcurrence { i, j, value: pair_concurrence(rho, i, j)? }),
            None => None,
        };
        Ok(MetricRecord {
            fidelity: fidelity(rho, target)?,
            purity: purity(rho),
            concurrence,
            mode_occupations: mode_occupations(rho, spec)?,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{basis_index, mode_excitation_state};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = nalgebra::DVector::zeros(4);
        a[basis_index(&[true, false])] = c(s);
        a[basis_index(&[false, true])] = c(s);
        StateVector::new(a)
    }

    #[test]
    fn fidelity_examples() {
        let psi = mode_excitation_state(&ChainSpec::new(5, 1.0).unwrap(), 1).unwrap();
        assert!((fidelity(&DensityMatrix::from_pure(&psi), &psi).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(32);
        assert!((fidelity(&mixed, &psi).unwrap() - (1.0f64 / 32.0).sqrt()).abs() < 1e-12);
        let vac = DensityMatrix::from_pure(&StateVector::all_down(5));
        assert_eq!(fidelity(&vac, &psi).unwrap(), 0.0);
        assert!(fidelity(&DensityMatrix::maximally_mixed(4), &psi).is_err());
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&DensityMatrix::from_pure(&bell())) - 1.0).abs() < 1e-14);
        assert!((purity(&DensityMatrix::maximally_mixed(4)) - 0.25).abs() < 1e-14);
        let mix = DensityMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.5),
            c(0.5),
        ])))
        .unwrap();
        assert!((purity(&mix) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn partial_trace_examples() {
        let prod = DensityMatrix::from_pure(&StateVector::from_spins(&[true, false]));
        let left = partial_trace(&prod, &[1]).unwrap();
        assert!((left.matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
        let right = partial_trace(&prod, &[2]).unwrap();
        assert!((right.matrix()[(1, 1)] - c(1.0)).norm() < 1e-15);

        let b = DensityMatrix::from_pure(&bell());
        let red = partial_trace(&b, &[1]).unwrap();
        assert!(red.trace_distance(&DensityMatrix::maximally_mixed(2)) < 1e-15);
        assert_eq!(partial_trace(&b, &[1, 2]).unwrap(), b);

        assert!(partial_trace(&b, &[]).is_err());
        assert!(partial_trace(&b, &[3]).is_err());
        assert!(partial_trace(&b, &[2, 1]).is_err());
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&DensityMatrix::from_pure(&bell())).unwrap() - 1.0).abs() < 1e-10);
        let prod = DensityMatrix::from_pure(&StateVector::from_spins(&[true, false]));
        assert!(concurrence(&prod).unwrap() < 1e-10);
        assert_eq!(concurrence(&DensityMatrix::maximally_mixed(4)).unwrap(), 0.0);
        assert!(concurrence(&DensityMatrix::maximally_mixed(8)).is_err());
    }

    #[test]
    fn occupations_of_simple_states() {
        let spec = ChainSpec::new(2, 1.0).unwrap();
        let vac = DensityMatrix::from_pure(&StateVector::all_down(2));
        assert!(mode_occupations(&vac, &spec).unwrap().iter().all(|&n| n.abs() < 1e-15));
        let mixed = mode_occupations(&DensityMatrix::maximally_mixed(4), &spec).unwrap();
        assert!(mixed.iter().all(|&n| (n - 0.5).abs() < 1e-14));
    }
}

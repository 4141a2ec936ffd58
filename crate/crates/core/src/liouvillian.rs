//! Vectorized Lindblad generators.
//!
//! Density matrices are vectorized by stacking columns, so element `(i, j)`
//! of a `d x d` matrix sits at index `i + j d` and
//! `vec(A X B) = (B^T ⊗ A) vec(X)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainSpec, NoiseSpec, Polarization, ReservoirSpec};
use crate::operators::{chain_hamiltonian, jw_mode_operator, site_operator, OperatorMatrix, SiteOp};
use crate::sparse::CsrMatrix;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which coherent term the dynamics keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `-i[H_c, rho]` plus all dissipators.
    #[default]
    Lab,
    /// Dissipators only; the chain Hamiltonian is rotated away.
    Interaction,
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(Frame::Lab),
            "interaction" => Ok(Frame::Interaction),
            other => Err(Error::Config(format!("unknown frame '{other}' (expected lab|interaction)"))),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Lab => "lab",
            Frame::Interaction => "interaction",
        })
    }
}

/// Provenance of one additive piece of a [`Liouvillian`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Part {
    Hamiltonian { label: String },
    Dissipator { label: String, rate: f64 },
    Engineered { mode: usize, polarization: Polarization, gamma: f64 },
    Natural { kappa: f64, kappa_phi: f64, nbar: f64 },
}

/// Sparse generator acting on `vec(rho)`, of dimension `d^2`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hilbert_dim: usize,
    matrix: CsrMatrix,
    parts: Vec<Part>,
}

impl Liouvillian {
    pub fn zero(hilbert_dim: usize) -> Self {
        let d2 = hilbert_dim * hilbert_dim;
        Liouvillian { hilbert_dim, matrix: CsrMatrix::zeros(d2, d2), parts: Vec::new() }
    }

    /// Wraps a raw superoperator; `matrix` must be `d^2 x d^2`.
    pub fn from_matrix(hilbert_dim: usize, matrix: CsrMatrix) -> Result<Self> {
        let d2 = hilbert_dim * hilbert_dim;
        if matrix.nrows() != d2 || matrix.ncols() != d2 {
            return Err(Error::DimensionMismatch { expected: d2, found: matrix.nrows() });
        }
        Ok(Liouvillian { hilbert_dim, matrix, parts: Vec::new() })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Superoperator dimension `d^2`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn add(mut self, other: &Liouvillian) -> Self {
        assert_eq!(self.hilbert_dim, other.hilbert_dim);
        self.matrix = self.matrix.add(&other.matrix);
        self.parts.extend(other.parts.iter().cloned());
        self
    }

    /// `L(rho)` as a matrix.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != self.hilbert_dim || rho.ncols() != self.hilbert_dim {
            return Err(Error::DimensionMismatch { expected: self.hilbert_dim, found: rho.nrows() });
        }
        devectorize(&self.matrix.mul_vec(&vectorize(rho)))
    }

    /// Largest entry of `vec(I)^T L`, zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.dim()];
        for i in 0..d {
            for (c, v) in self.matrix.row(i + i * d) {
                acc[c] += v;
            }
        }
        acc.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &DMatrix<Complex64>) -> Vec<Complex64> {
    // nalgebra stores column-major
    rho.as_slice().to_vec()
}

pub fn devectorize(v: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::DimensionMismatch { expected: d * d, found: v.len() });
    }
    Ok(DMatrix::from_column_slice(d, d, v))
}

fn hermiticity_tol(op: &OperatorMatrix) -> f64 {
    1e-12 * op.to_csr().max_abs().max(1.0)
}

/// `-i (I ⊗ H - H^T ⊗ I)`, the generator of `-i[H, rho]`.
pub fn hamiltonian_part(h: &OperatorMatrix) -> Result<Liouvillian> {
    let err = h.hermiticity_error();
    if err > hermiticity_tol(h) {
        return Err(Error::NonHermitian(err));
    }
    let d = h.dim();
    let hs = h.to_csr();
    let id = CsrMatrix::identity(d);
    let matrix = id.kron(&hs).add_scaled(&hs.transpose().kron(&id), -ONE).scale(Complex64::new(0.0, -1.0));
    Ok(Liouvillian {
        hilbert_dim: d,
        matrix,
        parts: vec![Part::Hamiltonian { label: h.label().to_string() }],
    })
}

/// `(rate/2) (2 L rho L^dag - rho L^dag L - L^dag L rho)` in superoperator form
/// `(rate/2) (2 conj(L) ⊗ L - I ⊗ L^dag L - (L^dag L)^T ⊗ I)`.
pub fn dissipator(jump: &OperatorMatrix, rate: f64) -> Result<Liouvillian> {
    if !(rate >= 0.0) {
        return Err(Error::NegativeRate(rate));
    }
    let d = jump.dim();
    let mut out = Liouvillian::zero(d);
    out.parts.push(Part::Dissipator { label: jump.label().to_string(), rate });
    if rate == 0.0 {
        return Ok(out);
    }
    let l = jump.to_csr();
    let ldl = l.adjoint().matmul(&l);
    let id = CsrMatrix::identity(d);
    let half = Complex64::new(rate / 2.0, 0.0);
    out.matrix = l
        .conj()
        .kron(&l)
        .scale(Complex64::new(rate, 0.0))
        .add_scaled(&id.kron(&ldl), -half)
        .add_scaled(&ldl.transpose().kron(&id), -half);
    Ok(out)
}

/// Engineered eigenmode dissipators: `D[f_k]` for ground-state reservoirs
/// (cooling) and `D[f_k^dag]` for excited-state reservoirs (pumping).
pub fn engineered_liouvillian(spec: &ChainSpec, reservoirs: &[ReservoirSpec]) -> Result<Liouvillian> {
    spec.validate()?;
    let mut seen = vec![false; spec.n + 1];
    for r in reservoirs {
        spec.check_mode(r.mode)?;
        r.validate()?;
        if std::mem::replace(&mut seen[r.mode], true) {
            return Err(Error::DuplicateMode(r.mode));
        }
    }
    let mut out = Liouvillian::zero(spec.dim());
    for r in reservoirs {
        let f = jw_mode_operator(spec, r.mode)?;
        let jump = match r.polarization {
            Polarization::Ground => f,
            Polarization::Excited => f.adjoint(),
        };
        let mut d = dissipator(&jump, r.gamma)?;
        d.parts = vec![Part::Engineered { mode: r.mode, polarization: r.polarization, gamma: r.gamma }];
        out = out.add(&d);
    }
    Ok(out)
}

/// Site-local thermal amplitude damping and dephasing:
/// `sum_i D[S-_i] kappa (1 + nbar) + D[S+_i] kappa nbar + D[Z_i] kappa_phi`.
pub fn natural_liouvillian(spec: &ChainSpec, noise: &NoiseSpec) -> Result<Liouvillian> {
    spec.validate()?;
    noise.validate()?;
    let mut out = Liouvillian::zero(spec.dim());
    for i in 1..=spec.n {
        let terms = [
            (SiteOp::Minus, noise.kappa * (1.0 + noise.nbar)),
            (SiteOp::Plus, noise.kappa * noise.nbar),
            (SiteOp::Z, noise.kappa_phi),
        ];
        for (op, rate) in terms {
            if rate > 0.0 {
                out = out.add(&dissipator(&site_operator(spec.n, i, op)?, rate)?);
            }
        }
    }
    out.parts = vec![Part::Natural { kappa: noise.kappa, kappa_phi: noise.kappa_phi, nbar: noise.nbar }];
    Ok(out)
}

/// Full generator for the chain with engineered reservoirs and natural noise.
pub fn total_liouvillian(
    spec: &ChainSpec,
    reservoirs: &[ReservoirSpec],
    noise: &NoiseSpec,
    frame: Frame,
) -> Result<Liouvillian> {
    let engineered = engineered_liouvillian(spec, reservoirs)?;
    let natural = natural_liouvillian(spec, noise)?;
    let base = match frame {
        Frame::Lab => hamiltonian_part(&chain_hamiltonian(spec))?,
        Frame::Interaction => Liouvillian::zero(spec.dim()),
    };
    Ok(base.add(&engineered).add(&natural))
}

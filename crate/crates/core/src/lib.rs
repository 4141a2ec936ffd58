//! Dissipative preparation of entangled steady states in XY spin chains.
//!
//! Engineered reservoirs pump one fermionic eigenmode of an open XY chain
//! and cool the others; the steady state of the resulting Lindblad
//! generator approaches the single-excitation eigenstate `f_k^dag |0>_N`
//! even with site-local damping, thermal noise, and dephasing present.
//!
//! * [`model`]: chain parameters, quadratic coupling matrix and its diagonalization.
//! * [`operators`]: Pauli embeddings, Jordan–Wigner mode operators, target states.
//! * [`liouvillian`]: vectorized Hamiltonian, engineered and natural generators.
//! * [`solvers`]: steady states (sparse LU or time marching) and evolution.
//! * [`metrics`]: fidelity, purity, partial trace, concurrence, mode occupations.
//! * [`experiments`]: declarative sweeps writing CSV.

pub mod error;
pub mod experiments;
pub mod liouvillian;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use liouvillian::{Frame, Liouvillian};
pub use model::{ChainSpec, NoiseSpec, Polarization, QuadraticModel, ReservoirSpec};
pub use operators::{OperatorMatrix, StateVector};
pub use solvers::{DensityMatrix, SolverOptions, SteadyMethod};

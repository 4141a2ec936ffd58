//! Reference constructions built from explicit basis-state bookkeeping, with
//! no use of the crate's Kronecker or Jordan-Wigner code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type M = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Bit of site `j` (1-based, site 1 most significant); a set bit means down.
fn bit(n: usize, j: usize) -> usize {
    1 << (n - j)
}

fn up(b: usize, n: usize, j: usize) -> bool {
    b & bit(n, j) == 0
}

/// `S-_j` as an explicit matrix.
pub fn lower(n: usize, j: usize) -> M {
    let d = 1 << n;
    let mut m = M::zeros(d, d);
    for b in 0..d {
        if up(b, n, j) {
            m[(b | bit(n, j), b)] = c(1.0);
        }
    }
    m
}

pub fn raise(n: usize, j: usize) -> M {
    lower(n, j).adjoint()
}

pub fn pauli_z(n: usize, j: usize) -> M {
    let d = 1 << n;
    M::from_diagonal(&DVector::from_fn(d, |b, _| c(if up(b, n, j) { 1.0 } else { -1.0 })))
}

/// Fermion annihilator with sign `(-1)^(number of up sites left of j)`.
pub fn fermion(n: usize, j: usize) -> M {
    let d = 1 << n;
    let mut m = M::zeros(d, d);
    for b in 0..d {
        if up(b, n, j) {
            let left = (1..j).filter(|&l| up(b, n, l)).count();
            m[(b | bit(n, j), b)] = c(if left % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    m
}

pub fn amplitude(n: usize, j: usize, k: usize) -> f64 {
    let np1 = (n + 1) as f64;
    (2.0 / np1).sqrt() * (j as f64 * k as f64 * std::f64::consts::PI / np1).sin()
}

pub fn mode(n: usize, k: usize) -> M {
    let d = 1 << n;
    (1..=n).fold(M::zeros(d, d), |acc, j| acc + fermion(n, j) * c(amplitude(n, j, k)))
}

pub fn frequency(n: usize, jc: f64, k: usize) -> f64 {
    2.0 * jc * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()
}

/// `J sum_j (S+_j S-_{j+1} + S-_j S+_{j+1})`.
pub fn hamiltonian(n: usize, jc: f64) -> M {
    let d = 1 << n;
    (1..n).fold(M::zeros(d, d), |acc, j| {
        acc + (raise(n, j) * lower(n, j + 1) + lower(n, j) * raise(n, j + 1)) * c(jc)
    })
}

/// Index of the state with only site `j` up.
pub fn single_up(n: usize, j: usize) -> usize {
    ((1 << n) - 1) ^ bit(n, j)
}

pub fn single_excitation(n: usize, amps: &[f64]) -> DVector<Complex64> {
    let mut v = DVector::zeros(1 << n);
    for (j, &a) in amps.iter().enumerate() {
        v[single_up(n, j + 1)] = c(a);
    }
    v
}

/// The five-site target written out amplitude by amplitude.
pub fn phi5() -> DVector<Complex64> {
    let s3 = 3f64.sqrt();
    single_excitation(5, &[1.0 / (2.0 * s3), 0.5, 1.0 / s3, 0.5, 1.0 / (2.0 * s3)])
}

/// `-i[H, rho] + sum rate (L rho L^dag - {L^dag L, rho}/2)` by plain products.
pub fn lindblad_rhs(h: Option<&M>, jumps: &[(M, f64)], rho: &M) -> M {
    let mut out = match h {
        Some(h) => (h * rho - rho * h) * Complex64::new(0.0, -1.0),
        None => M::zeros(rho.nrows(), rho.ncols()),
    };
    for (l, rate) in jumps {
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * c(0.5)) * c(*rate);
    }
    out
}

/// Jump list for engineered pump on `pumped` and cooling on `cooled`, plus
/// site noise.
pub fn jumps(
    n: usize,
    pumped: &[(usize, f64)],
    cooled: &[(usize, f64)],
    kappa: f64,
    kappa_phi: f64,
    nbar: f64,
) -> Vec<(M, f64)> {
    let mut out = Vec::new();
    for &(k, g) in pumped {
        out.push((mode(n, k).adjoint(), g));
    }
    for &(k, g) in cooled {
        out.push((mode(n, k), g));
    }
    for j in 1..=n {
        out.push((lower(n, j), kappa * (1.0 + nbar)));
        out.push((raise(n, j), kappa * nbar));
        out.push((pauli_z(n, j), kappa_phi));
    }
    out
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_density<R: Rng>(d: usize, rng: &mut R) -> M {
    let g = M::from_fn(d, d, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

/// Haar-ish random single-qubit unitary from a QR of a Gaussian matrix.
pub fn random_unitary2<R: Rng>(rng: &mut R) -> nalgebra::Matrix2<Complex64> {
    let g = nalgebra::Matrix2::from_fn(|_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    g.qr().q()
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

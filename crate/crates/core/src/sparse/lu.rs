//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Column-by-column Gilbert–Peierls factorization `P A Q = L U`: each
//! column of `L` and `U` comes from a sparse triangular solve against the
//! columns already factored, with the nonzero pattern found by a depth-first
//! search over the graph of `L`. Columns are pre-ordered with reverse
//! Cuthill–McKee on the pattern of `A + A^T`.

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

use super::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LuError {
    #[error("matrix is not square ({0} x {1})")]
    NotSquare(usize, usize),
    #[error("matrix is numerically singular at column {col} (pivot {pivot:e})")]
    Singular { col: usize, pivot: f64 },
}

/// Column-compressed factor.
#[derive(Debug, Clone)]
struct Csc {
    colptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Csc {
    fn col(&self, j: usize) -> std::ops::Range<usize> {
        self.colptr[j]..self.colptr[j + 1]
    }
}

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Unit lower factor, diagonal stored first in each column.
    lower: Csc,
    /// Upper factor, diagonal stored last in each column.
    upper: Csc,
    /// Row `i` of `A` becomes row `pinv[i]` of `L U`.
    pinv: Vec<usize>,
    /// Column `k` of `L U` is column `q[k]` of `A`.
    q: Vec<usize>,
}

/// Diagonal pivot is kept when it is at least this fraction of the column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;

impl SparseLu {
    /// Factors `a`. `singular_tol` is the absolute pivot magnitude below which
    /// the matrix is reported singular.
    pub fn factor(a: &CsrMatrix, singular_tol: f64) -> Result<Self, LuError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LuError::NotSquare(n, a.ncols()));
        }
        // CSR of A^T is CSC of A
        let at = a.transpose();
        let q = rcm_order(a, &at);

        let mut lower = Csc { colptr: vec![0], rows: Vec::new(), vals: Vec::new() };
        let mut upper = Csc { colptr: vec![0], rows: Vec::new(), vals: Vec::new() };
        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let zero = Complex64::new(0.0, 0.0);
        let mut x = vec![zero; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut cursor = vec![0usize; n];
        let mut marked = vec![false; n];

        for k in 0..n {
            let col = q[k];
            let b_rows = &at.indices()[at.indptr()[col]..at.indptr()[col + 1]];
            let b_vals = &at.values()[at.indptr()[col]..at.indptr()[col + 1]];

            // nonzero pattern of L \ b in topological order: xi[top..n]
            let mut top = n;
            for &start in b_rows {
                if marked[start] {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                loop {
                    let j = stack[head];
                    let jcol = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        cursor[head] = if jcol == UNSET { 0 } else { lower.colptr[jcol] + 1 };
                    }
                    let end = if jcol == UNSET { 0 } else { lower.colptr[jcol + 1] };
                    let mut descended = false;
                    while cursor[head] < end {
                        let i = lower.rows[cursor[head]];
                        cursor[head] += 1;
                        if !marked[i] {
                            head += 1;
                            stack[head] = i;
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }
            for &i in &xi[top..n] {
                marked[i] = false;
                x[i] = zero;
            }
            for (&r, &v) in b_rows.iter().zip(b_vals) {
                x[r] = v;
            }

            // sparse forward substitution
            for &j in &xi[top..n] {
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in lower.col(jcol).skip(1) {
                    x[lower.rows[p]] -= lower.vals[p] * xj;
                }
            }

            // pivot selection among rows not yet pivotal
            let mut ipiv = UNSET;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    let mag = x[i].norm();
                    if mag > best {
                        best = mag;
                        ipiv = i;
                    }
                } else {
                    upper.rows.push(pinv[i]);
                    upper.vals.push(x[i]);
                }
            }
            if ipiv == UNSET || best <= singular_tol {
                return Err(LuError::Singular { col: k, pivot: best.max(0.0) });
            }
            if pinv[col] == UNSET && x[col].norm() >= PIVOT_THRESHOLD * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            upper.rows.push(k);
            upper.vals.push(pivot);
            upper.colptr.push(upper.rows.len());

            pinv[ipiv] = k;
            lower.rows.push(ipiv);
            lower.vals.push(Complex64::new(1.0, 0.0));
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    lower.rows.push(i);
                    lower.vals.push(x[i] / pivot);
                }
            }
            lower.colptr.push(lower.rows.len());
        }
        for r in lower.rows.iter_mut() {
            *r = pinv[*r];
        }
        Ok(SparseLu { n, lower, upper, pinv, q })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Fill of the factors, `nnz(L) + nnz(U)`.
    pub fn nnz(&self) -> usize {
        self.lower.rows.len() + self.upper.rows.len()
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, &v) in b.iter().enumerate() {
            x[self.pinv[i]] = v;
        }
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lower.col(j).skip(1) {
                x[self.lower.rows[p]] -= self.lower.vals[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let span = self.upper.col(j);
            let last = span.end - 1;
            x[j] /= self.upper.vals[last];
            let xj = x[j];
            for p in span.start..last {
                x[self.upper.rows[p]] -= self.upper.vals[p] * xj;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (k, &col) in self.q.iter().enumerate() {
            out[col] = x[k];
        }
        out
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern.
fn rcm_order(a: &CsrMatrix, at: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, list) in adj.iter_mut().enumerate() {
        list.extend(a.row(i).map(|(j, _)| j).filter(|&j| j != i));
        list.extend(at.row(i).map(|(j, _)| j).filter(|&j| j != i));
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            // diagonal kept small so that off-diagonal pivots get exercised
            t.push((i, i, Complex64::new(rng.random_range(-0.1..0.1), 0.0)));
            for j in 0..n {
                if i != j && rng.random_bool(density) {
                    t.push((i, j, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn solves_random_systems() {
        for (n, seed) in [(5, 1), (30, 2), (120, 3)] {
            let a = random_sparse(n, 0.08, seed);
            let lu = SparseLu::factor(&a, 1e-14).unwrap();
            let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let x = lu.solve(&b);
            let r = a.mul_vec(&x);
            let err = r.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n = {n}: residual {err}");
        }
    }

    #[test]
    fn matches_dense_solve() {
        let a = random_sparse(12, 0.3, 7);
        let b: Vec<Complex64> = (0..12).map(|i| Complex64::new(1.0, -(i as f64))).collect();
        let x = SparseLu::factor(&a, 1e-14).unwrap().solve(&b);
        let dense: DMatrix<Complex64> = a.to_dense();
        let xd = dense.lu().solve(&DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(xd.iter()) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn detects_singular() {
        let one = Complex64::new(1.0, 0.0);
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, one), (0, 1, one), (1, 0, one), (1, 1, one), (2, 2, one)]);
        assert!(matches!(SparseLu::factor(&a, 1e-12), Err(LuError::Singular { .. })));
        let empty_row = CsrMatrix::from_triplets(2, 2, vec![(0, 0, one), (0, 1, one)]);
        assert!(SparseLu::factor(&empty_row, 1e-12).is_err());
    }
}

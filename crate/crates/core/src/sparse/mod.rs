//! Compressed sparse row storage for complex matrices.

mod lu;

pub use lu::{LuError, SparseLu};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Compressed sparse row matrix over `Complex64`.
///
/// Column indices are sorted within each row and contain no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }.pruned()
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    fn pruned(mut self) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        if self.data.iter().all(|&v| v != zero) {
            return self;
        }
        let mut w = 0;
        let mut start = 0;
        for r in 0..self.nrows {
            let end = self.indptr[r + 1];
            for p in start..end {
                if self.data[p] != zero {
                    self.indices[w] = self.indices[p];
                    self.data[w] = self.data[p];
                    w += 1;
                }
            }
            start = end;
            self.indptr[r + 1] = w;
        }
        self.indices.truncate(w);
        self.data.truncate(w);
        self
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(p) => self.data[span.start + p],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[p] * x[self.indices[p]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out.pruned()
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for r in 0..self.nrows {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).map(|(c, v)| (c, v * s)).peekable();
            loop {
                let next = match (a.peek(), b.peek()) {
                    (Some(&(ca, va)), Some(&(cb, vb))) => {
                        if ca < cb {
                            a.next();
                            (ca, va)
                        } else if cb < ca {
                            b.next();
                            (cb, vb)
                        } else {
                            a.next();
                            b.next();
                            (ca, va + vb)
                        }
                    }
                    (Some(_), None) => a.next().unwrap(),
                    (None, Some(_)) => b.next().unwrap(),
                    (None, None) => break,
                };
                indices.push(next.0);
                data.push(next.1);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }.pruned()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = vec![zero; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols = Vec::new();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                data.push(acc[c]);
                acc[c] = zero;
                touched[c] = false;
            }
            cols.clear();
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }.pruned()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut data = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for ra in 0..self.nrows {
            for rb in 0..other.nrows {
                for (ca, va) in self.row(ra) {
                    for (cb, vb) in other.row(rb) {
                        indices.push(ca * other.ncols + cb);
                        data.push(va * vb);
                    }
                }
                indptr.push(indices.len());
            }
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }.pruned()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Principal submatrix on `keep` (sorted, distinct indices).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.ncols];
        for (i, &g) in keep.iter().enumerate() {
            local[g] = i;
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for &g in keep {
            for (c, v) in self.row(g) {
                if local[c] != usize::MAX {
                    indices.push(local[c]);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: keep.len(), ncols: keep.len(), indptr, indices, data }
    }

    /// Indices reachable from `seeds` through the (undirected) sparsity graph.
    ///
    /// For a square matrix the returned set is a union of connected
    /// components, so the matrix is block diagonal with respect to it and
    /// its complement. Returned sorted.
    pub fn closure(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<usize> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        // column -> rows adjacency, for the reverse edges
        let mut col_count = vec![0usize; n + 1];
        for &c in &self.indices {
            col_count[c + 1] += 1;
        }
        for c in 0..n {
            col_count[c + 1] += col_count[c];
        }
        let mut fill = col_count.clone();
        let mut rows_of = vec![0usize; self.nnz()];
        for r in 0..n {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[p];
                rows_of[fill[c]] = r;
                fill[c] += 1;
            }
        }

        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(i) = stack.pop() {
            let fwd = self.indices[self.indptr[i]..self.indptr[i + 1]].iter();
            let back = rows_of[col_count[i]..col_count[i + 1]].iter();
            for &j in fwd.chain(back) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..n).filter(|&i| seen[i]).collect()
    }
}

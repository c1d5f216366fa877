//! Compressed sparse row storage, deterministic triplet assembly and the
//! sparse direct factorizations used throughout the crate.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Accumulates `(row, col, value)` contributions. Duplicates are summed in
/// insertion order after a stable sort, so the compressed matrix does not
/// depend on how the contributions were scheduled within a row/col pair.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend_from(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], data: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.build()
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

    /// Iterator over `(col, value)` pairs stored in `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[row]..self.indptr[row + 1];
        self.indices[range.clone()].iter().copied().zip(self.data[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.indptr[row]..self.indptr[row + 1];
        match self.indices[range.clone()].binary_search(&col) {
            Ok(k) => self.data[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: input length");
        assert_eq!(y.len(), self.nrows, "matvec: output length");
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    /// `b − A x` evaluated with compensated products and sums (Dot2), so the
    /// result is accurate as if computed in twice the working precision.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "residual: input length");
        assert_eq!(b.len(), self.nrows, "residual: rhs length");
        (0..self.nrows)
            .map(|r| {
                let (mut s, mut c) = (b[r], 0.0);
                for k in self.indptr[r]..self.indptr[r + 1] {
                    let a = -self.data[k];
                    let xv = x[self.indices[k]];
                    let p = a * xv;
                    let pe = a.mul_add(xv, -p);
                    let t = s + p;
                    let z = t - s;
                    let se = (s - (t - z)) + (p - z);
                    s = t;
                    c += pe + se;
                }
                s + c
            })
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        t.build()
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `diag(dr) * self * diag(dc)`.
    pub fn scale_rows_cols(&self, dr: &[f64], dc: &[f64]) -> CsrMatrix {
        assert_eq!(dr.len(), self.nrows);
        assert_eq!(dc.len(), self.ncols);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.data[k] *= dr[i] * dc[self.indices[k]];
            }
        }
        out
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "axpby: shapes");
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (r, c, v) in self.iter() {
            t.push(r, c, a * v);
        }
        for (r, c, v) in other.iter() {
            t.push(r, c, b * v);
        }
        t.build()
    }

    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        self.axpby(1.0, other, 1.0)
    }

    /// Sparse product `self * other`, accumulated row by row in a fixed order.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul: inner dimensions");
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                data.push(acc[c]);
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference, comparing the union of both patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.axpby(1.0, other, -1.0).max_abs()
    }

    pub fn is_symmetric_exact(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// Removes stored entries whose magnitude is at most `tol`.
    pub fn pruned(&self, tol: f64) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            if v.abs() > tol {
                t.push(r, c, v);
            }
        }
        t.build()
    }

    /// Zeroes the given rows and columns. When `unit_diagonal` is set, the
    /// diagonal entry of each eliminated row becomes 1.
    pub fn eliminate(&self, rows: &[bool], cols: &[bool], unit_diagonal: bool) -> CsrMatrix {
        assert_eq!(rows.len(), self.nrows);
        assert_eq!(cols.len(), self.ncols);
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.iter() {
            if !rows[r] && !cols[c] {
                t.push(r, c, v);
            }
        }
        if unit_diagonal {
            for (i, &e) in rows.iter().enumerate() {
                if e {
                    t.push(i, i, 1.0);
                }
            }
        }
        t.build()
    }

    /// Dense copy of the submatrix selected by `rows` x `cols`.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }
}

/// Places sparse blocks into one matrix. `blocks[i][j] == None` is a zero block.
pub fn block_matrix(blocks: &[Vec<Option<&CsrMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> CsrMatrix {
    let roff: Vec<usize> = offsets(row_sizes);
    let coff: Vec<usize> = offsets(col_sizes);
    let n = *roff.last().unwrap();
    let m = *coff.last().unwrap();
    let mut t = TripletBuilder::new(n, m);
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, blk) in row.iter().enumerate() {
            if let Some(b) = blk {
                assert_eq!((b.nrows(), b.ncols()), (row_sizes[bi], col_sizes[bj]), "block ({bi},{bj}) shape");
                for (r, c, v) in b.iter() {
                    t.push(roff[bi] + r, coff[bj] + c, v);
                }
            }
        }
    }
    t.build()
}

pub fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    out.push(0);
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn col_to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct CholeskyFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholeskyFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let fa = a.to_faer()?;
        let llt = fa
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("cholesky: {e:?}")))?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        col_to_vec(&self.llt.solve(&rhs))
    }
}

impl std::fmt::Debug for CholeskyFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CholeskyFactor").field("n", &self.n).finish()
    }
}

/// Sparse LU factorization with partial pivoting.
pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let fa = a.to_faer()?;
        let lu = fa.sp_lu().map_err(|e| Error::Factorization(format!("lu: {e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        col_to_vec(&self.lu.solve(&rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 2.0);
        t.push(0, 1, 3.0);
        let m = t.build();
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        let b = a.transpose();
        let c = a.matmul(&b);
        assert_eq!(c.to_dense(), a.to_dense() * a.to_dense().transpose());
    }

    #[test]
    fn elimination_keeps_unit_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = a.eliminate(&[true, false], &[true, false], true);
        assert_eq!(e.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn factorizations_solve_small_spd() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = CholeskyFactor::new(&a).unwrap().solve(&[1.0, 1.0]);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
        let y = LuFactor::new(&a).unwrap().solve(&[1.0, 1.0]);
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-15);
    }
}

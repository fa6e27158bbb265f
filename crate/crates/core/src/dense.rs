//! Column-major dense matrices.
//!
//! The same type backs the tall orthonormal bases (`U`, `V`, `U_c`, `V_c`) and the
//! small projected matrices of the extraction step. Columns are contiguous, so
//! appending a basis vector is a `Vec::extend`.

use std::fmt;

use crate::vecops;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { nrows, ncols, data }
    }

    /// Builds from row-major nested rows, the natural literal layout in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_cols(nrows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::with_capacity(nrows, cols.len());
        for c in cols {
            m.push_col(c);
        }
        m
    }

    /// An `nrows x 0` block with room for `cap` columns.
    pub fn with_capacity(nrows: usize, cap: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols: 0,
            data: Vec::with_capacity(nrows * cap),
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.ncols == 0 || self.nrows == 0
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn cols(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    pub fn push_col(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.nrows, "column length mismatch");
        self.data.extend_from_slice(c);
        self.ncols += 1;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                vecops::axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// `self^T * x`
    pub fn t_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        self.cols().map(|c| vecops::dot(c, x)).collect()
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut out = DenseMatrix::with_capacity(self.nrows, other.ncols);
        for j in 0..other.ncols {
            out.push_col(&self.mul_vec(other.col(j)));
        }
        out
    }

    /// `self^T * other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.nrows, other.nrows, "t_matmul shape mismatch");
        DenseMatrix::from_fn(self.ncols, other.ncols, |i, j| {
            vecops::dot(self.col(i), other.col(j))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        vecops::norm2(&self.data)
    }

    /// Largest entry of `|B^T B - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.t_matmul(self);
        let mut e: f64 = 0.0;
        for j in 0..g.ncols {
            for i in 0..g.nrows {
                let target = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - target).abs());
            }
        }
        e
    }

    /// Replaces the matrix by `(S + S^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for i in (j + 1)..self.nrows {
                let a = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = a;
                self[(j, i)] = a;
            }
        }
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&mut self, k: usize) {
        if k < self.ncols {
            self.data.truncate(k * self.nrows);
            self.ncols = k;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        vecops::scale(alpha, &mut self.data);
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows.min(12) {
            let row: Vec<String> = (0..self.ncols.min(12))
                .map(|j| format!("{:>11.4e}", self[(i, j)]))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

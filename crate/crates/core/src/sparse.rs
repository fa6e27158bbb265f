//! Compressed sparse storage with both row and column views, so that `A v` and
//! `A^T u` are each a single streaming pass.

use crate::dense::DenseMatrix;
use crate::error::{JdsvdError, Result};
use crate::vecops;

#[derive(Clone, Debug)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    // CSR
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    // CSC of the same entries
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals_t: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from zero-based `(row, col, value)` triplets. Repeated positions are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(JdsvdError::Precondition(format!(
                "matrix dimensions must be positive, got {nrows}x{ncols}"
            )));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(JdsvdError::IndexOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let nnz = merged.len();
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for &(r, c, v) in &merged {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            vals.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }

        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &merged {
            col_ptr[c + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; nnz];
        let mut vals_t = vec![0.0; nnz];
        for &(r, c, v) in &merged {
            let slot = next[c];
            row_idx[slot] = r;
            vals_t[slot] = v;
            next[c] += 1;
        }

        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
            col_ptr,
            row_idx,
            vals_t,
        })
    }

    /// Converts a dense matrix, dropping entries whose magnitude is at most `drop_below`.
    pub fn from_dense(dense: &DenseMatrix, drop_below: f64) -> Result<Self> {
        let mut t = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v.abs() > drop_below {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), t)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Row-major iteration over stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: self.col_ptr.clone(),
            col_idx: self.row_idx.clone(),
            vals: self.vals_t.clone(),
            col_ptr: self.row_ptr.clone(),
            row_idx: self.col_idx.clone(),
            vals_t: self.vals.clone(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(JdsvdError::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `A^T y`
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.nrows {
            return Err(JdsvdError::DimensionMismatch {
                expected: self.nrows,
                got: y.len(),
            });
        }
        let mut x = vec![0.0; self.ncols];
        self.apply_transpose_into(y, &mut x);
        Ok(x)
    }

    /// `out = A x`; lengths are the caller's responsibility.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *o = self.col_idx[lo..hi]
                .iter()
                .zip(&self.vals[lo..hi])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    /// `out = A^T y`
    pub fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        for (j, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
            *o = self.row_idx[lo..hi]
                .iter()
                .zip(&self.vals_t[lo..hi])
                .map(|(&i, &v)| v * y[i])
                .sum();
        }
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.ncols)
            .map(|j| {
                self.vals_t[self.col_ptr[j]..self.col_ptr[j + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        vecops::norm2(&self.vals)
    }
}

/// Outcome of orthonormalizing a vector against an orthonormal block.
#[derive(Clone, Debug, PartialEq)]
pub enum Orthonormalized {
    /// Unit vector orthogonal to the block, and `‖(I - B B^T) v‖` before normalization.
    Unit { vector: Vec<f64>, residual_norm: f64 },
    /// `v` lies numerically inside the span of the block.
    Reject { residual_norm: f64 },
}

impl Orthonormalized {
    pub fn into_vector(self) -> Option<Vec<f64>> {
        match self {
            Orthonormalized::Unit { vector, .. } => Some(vector),
            Orthonormalized::Reject { .. } => None,
        }
    }

    pub fn residual_norm(&self) -> f64 {
        match self {
            Orthonormalized::Unit { residual_norm, .. } | Orthonormalized::Reject { residual_norm } => {
                *residual_norm
            }
        }
    }
}

const REJECT_RATIO: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-12;

/// Projects the columns of `blocks` out of `w` (one classical Gram-Schmidt pass).
pub fn project_out(w: &mut [f64], blocks: &[&DenseMatrix]) {
    for b in blocks {
        let coeffs = b.t_mul_vec(w);
        for (j, c) in coeffs.iter().enumerate() {
            vecops::axpy(-c, b.col(j), w);
        }
    }
}

fn max_overlap(w: &[f64], blocks: &[&DenseMatrix]) -> f64 {
    blocks
        .iter()
        .flat_map(|b| b.cols().map(|c| vecops::dot(c, w).abs()))
        .fold(0.0, f64::max)
}

/// Orthonormalizes `v` against one orthonormal (possibly empty) block.
pub fn orthonormalize_against(v: &[f64], basis: &DenseMatrix) -> Orthonormalized {
    orthonormalize_against_all(v, &[basis])
}

/// Classical Gram-Schmidt with an unconditional second pass against every block in
/// `blocks` (each orthonormal, and mutually orthogonal). Should the result still
/// miss the orthogonality bound, up to two further passes are made before giving up.
pub fn orthonormalize_against_all(v: &[f64], blocks: &[&DenseMatrix]) -> Orthonormalized {
    let vnorm = vecops::norm2(v);
    if vnorm == 0.0 || !vnorm.is_finite() {
        return Orthonormalized::Reject { residual_norm: 0.0 };
    }
    let mut w = v.to_vec();
    project_out(&mut w, blocks);
    project_out(&mut w, blocks);
    let residual_norm = vecops::norm2(&w);
    if residual_norm <= REJECT_RATIO * vnorm {
        return Orthonormalized::Reject { residual_norm };
    }
    vecops::scale(1.0 / residual_norm, &mut w);
    let mut extra = 0;
    while max_overlap(&w, blocks) > ORTHO_TOL {
        if extra == 2 {
            return Orthonormalized::Reject { residual_norm };
        }
        project_out(&mut w, blocks);
        let n = vecops::norm2(&w);
        vecops::scale(1.0 / n, &mut w);
        extra += 1;
    }
    Orthonormalized::Unit {
        vector: w,
        residual_norm,
    }
}

//! Sparse test matrices `A = P Sigma Q^T` with a prescribed SVD.
//!
//! `P` and `Q` are products of two block-diagonal random orthogonal factors with
//! 4×4 blocks, the second offset by two rows, followed by a random row
//! permutation. Each row of `A` then has at most 64 nonzeros and the singular
//! values of `A` are known to rounding.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::DenseMatrix;
use crate::error::{JdsvdError, Result};
use crate::sparse::SparseMatrix;
use crate::vecops;

const BLOCK: usize = 4;

/// A matrix with its exact singular values (descending) and a target.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub name: String,
    pub a: SparseMatrix,
    pub sigma: Vec<f64>,
    pub tau: f64,
}

impl SyntheticProblem {
    /// The `l` singular values closest to `tau`, nearest first.
    pub fn closest(&self, l: usize) -> Vec<f64> {
        closest_to(&self.sigma, self.tau, l)
    }
}

pub fn closest_to(sigma: &[f64], tau: f64, l: usize) -> Vec<f64> {
    let mut s = sigma.to_vec();
    s.sort_by(|x, y| (x - tau).abs().total_cmp(&(y - tau).abs()));
    s.truncate(l);
    s
}

/// `p` values `lo 10^(...)` evenly spaced in log scale from `lo` to `hi`, ascending.
pub fn log_spaced(p: usize, lo: f64, hi: f64) -> Vec<f64> {
    if p == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..p)
        .map(|i| (a + (b - a) * i as f64 / (p - 1) as f64).exp())
        .collect()
}

/// Ascending values from `start` with consecutive gaps in `[min_gap, min_gap + jitter)`.
pub fn separated_spectrum(p: usize, start: f64, min_gap: f64, jitter: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(p);
    let mut x = start;
    for _ in 0..p {
        out.push(x);
        x += min_gap + jitter * rng.random::<f64>();
    }
    out
}

fn random_orthogonal_block(k: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut q = DenseMatrix::with_capacity(k, k);
    while q.ncols() < k {
        let mut x: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in q.cols() {
                let h = vecops::dot(c, &x);
                vecops::axpy(-h, c, &mut x);
            }
        }
        if vecops::normalize(&mut x) > 1e-8 {
            q.push_col(&x);
        }
    }
    q
}

fn block_diagonal(n: usize, offset: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut m = DenseMatrix::identity(n);
    let mut start = 0;
    let mut bounds = Vec::new();
    if offset > 0 {
        bounds.push((0, offset.min(n)));
        start = offset.min(n);
    }
    while start < n {
        let end = (start + BLOCK).min(n);
        bounds.push((start, end));
        start = end;
    }
    for (s, e) in bounds {
        let b = random_orthogonal_block(e - s, rng);
        for j in 0..e - s {
            for i in 0..e - s {
                m[(s + i, s + j)] = b[(i, j)];
            }
        }
    }
    m
}

/// Sparse random orthogonal `n×n` matrix.
pub fn sparse_orthogonal(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    let p = block_diagonal(n, 0, rng).matmul(&block_diagonal(n, BLOCK / 2, rng));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    DenseMatrix::from_fn(n, n, |i, j| p[(perm[i], j)])
}

/// `P Sigma Q^T` with `Sigma` holding `sigma` (any order, `min(m, n)` entries).
pub fn with_singular_values(m: usize, n: usize, sigma: &[f64], seed: u64) -> Result<SparseMatrix> {
    if sigma.len() != m.min(n) || sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(JdsvdError::Precondition(format!(
            "need {} finite nonnegative singular values",
            m.min(n)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = sparse_orthogonal(m, &mut rng);
    let q = sparse_orthogonal(n, &mut rng);
    let ps = DenseMatrix::from_fn(m, sigma.len(), |i, k| p[(i, k)] * sigma[k]);
    let qt = DenseMatrix::from_fn(sigma.len(), n, |k, j| q[(j, k)]);
    SparseMatrix::from_dense(&ps.matmul(&qt), 0.0)
}

/// Target a fraction `frac` of the way into the gap above the `j`-th smallest value.
pub fn gap_target(ascending: &[f64], j: usize, frac: f64) -> f64 {
    ascending[j] + frac * (ascending[j + 1] - ascending[j])
}

/// Ten problems up to 400×300 with gaps of at least 0.05 and an interior target
/// three tenths of the way into a gap about nine tenths up the spectrum.
///
/// Targets high in the spectrum leave most shifted values on one side of zero, so
/// MINRES converges well before finite termination even at these sizes.
pub fn acceptance_suite(seed: u64) -> Result<Vec<SyntheticProblem>> {
    const SIZES: [(usize, usize); 10] = [
        (400, 300),
        (300, 200),
        (360, 240),
        (250, 250),
        (200, 300),
        (320, 280),
        (150, 100),
        (400, 260),
        (280, 200),
        (220, 180),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SIZES
        .iter()
        .enumerate()
        .map(|(i, &(m, n))| {
            let p = m.min(n);
            let asc = separated_spectrum(p, 0.5, 0.05, 0.1, &mut rng);
            let j = (p as f64 * rng.random_range(0.88..0.92)) as usize;
            let tau = gap_target(&asc, j, 0.3);
            let a = with_singular_values(m, n, &asc, rng.random())?;
            let mut sigma = asc;
            sigma.reverse();
            Ok(SyntheticProblem {
                name: format!("synthetic-{}-{m}x{n}", i + 1),
                a,
                sigma,
                tau,
            })
        })
        .collect()
}

/// The log-spaced problem: `m×n`, singular values in `[1, 10]`, target inside the
/// gap above the `p / 3`-rd smallest value.
pub fn log_spaced_problem(m: usize, n: usize, seed: u64) -> Result<SyntheticProblem> {
    let asc = log_spaced(m.min(n), 1.0, 10.0);
    let tau = gap_target(&asc, asc.len() / 3, 0.3);
    let a = with_singular_values(m, n, &asc, seed)?;
    let mut sigma = asc;
    sigma.reverse();
    Ok(SyntheticProblem {
        name: format!("logspaced-{m}x{n}"),
        a,
        sigma,
        tau,
    })
}

//! Small dense symmetric eigenproblems and a dense SVD.
//!
//! Everything here is rotation based: cyclic Jacobi for the symmetric problem,
//! one-sided Jacobi for the SVD. The generalized solver reduces the pencil to
//! standard form through a Cholesky factor of `G`, falling back to a truncated
//! eigendecomposition of `G` when it is numerically semidefinite.

use crate::dense::DenseMatrix;
use crate::error::{JdsvdError, Result};
use crate::sparse::{orthonormalize_against, Orthonormalized};
use crate::vecops;

const EPS: f64 = f64::EPSILON;
const MAX_JACOBI_SWEEPS: usize = 30;
const MAX_SVD_SWEEPS: usize = 60;
/// Eigenvalues of `G` at or below this fraction of its largest are truncated.
pub const PENCIL_TRUNCATION: f64 = 1e-14;

/// Full eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `j` pairs with `values[j]`; orthonormal.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigensolver. The input is symmetrized first.
pub fn sym_eig(s: &DenseMatrix) -> Result<EigResult> {
    let n = s.nrows();
    assert_eq!(n, s.ncols(), "sym_eig needs a square matrix");
    let mut a = s.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let frob = a.frobenius();

    let mut converged = frob == 0.0 || n <= 1;
    let mut sweep = 0;
    while !converged {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= EPS * frob {
            converged = true;
            break;
        }
        if sweep == MAX_JACOBI_SWEEPS {
            return Err(JdsvdError::EigNoConvergence(MAX_JACOBI_SWEEPS));
        }
        sweep += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let sn = t * c;
                rotate_cols(&mut a, p, q, c, sn);
                rotate_rows(&mut a, p, q, c, sn);
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                rotate_cols(&mut v, p, q, c, sn);
            }
        }
    }
    debug_assert!(converged);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::with_capacity(n, n);
    for &i in &order {
        vectors.push_col(v.col(i));
    }
    Ok(EigResult { values, vectors })
}

/// `[col_p, col_q] <- [c col_p - s col_q, s col_p + c col_q]`
fn rotate_cols(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.nrows() {
        let (x, y) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * x - s * y;
        a[(k, q)] = s * x + c * y;
    }
}

fn rotate_rows(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.ncols() {
        let (x, y) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * x - s * y;
        a[(q, k)] = s * x + c * y;
    }
}

/// Eigenvalues only, ascending, via Householder tridiagonalization and implicit QL.
/// Meant for the larger (hundreds) matrices in the diagnostics, where Jacobi is slow.
pub fn sym_eigenvalues(s: &DenseMatrix) -> Result<Vec<f64>> {
    let n = s.nrows();
    assert_eq!(n, s.ncols(), "sym_eigenvalues needs a square matrix");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = s.clone();
    a.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = vecops::norm2(&x);
        d[k] = a[(k, k)];
        if xnorm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        vecops::normalize(&mut v);
        e[k] = alpha;
        // trailing block A <- H A H with H = I - 2 v v^T
        let off = k + 1;
        let len = n - off;
        let mut w = vec![0.0; len];
        for (jj, &vj) in v.iter().enumerate() {
            let col = &a.col(off + jj)[off..];
            vecops::axpy(vj, col, &mut w);
        }
        let vw = vecops::dot(&v, &w);
        let q: Vec<f64> = w.iter().zip(&v).map(|(wi, vi)| wi - vw * vi).collect();
        for jj in 0..len {
            let (vj, qj) = (v[jj], q[jj]);
            let col = &mut a.col_mut(off + jj)[off..];
            for ii in 0..len {
                col[ii] -= 2.0 * (v[ii] * qj + q[ii] * vj);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        e[n - 2] = a[(n - 1, n - 2)];
    }
    d[n - 1] = a[(n - 1, n - 1)];
    e[n - 1] = 0.0;

    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Implicit QL on the symmetric tridiagonal `(d, e)`, `e[i]` coupling `i` and `i + 1`.
/// Overwrites `d` with the (unsorted) eigenvalues.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= EPS * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(JdsvdError::EigNoConvergence(iter));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Lower Cholesky factor, or `None` when a pivot is not safely positive
/// (at or below `1e-13` times the largest diagonal entry).
pub fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.nrows();
    assert_eq!(n, g.ncols());
    let dmax = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
    if !(dmax > 0.0) {
        return None;
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut piv = g[(j, j)];
        for k in 0..j {
            piv -= l[(j, k)] * l[(j, k)];
        }
        if !(piv > 1e-13 * dmax) {
            return None;
        }
        let ljj = piv.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut x = 0.5 * (g[(i, j)] + g[(j, i)]);
            for k in 0..j {
                x -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = x / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` in place.
fn forward_subst(l: &DenseMatrix, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut x = b[i];
        for k in 0..i {
            x -= l[(i, k)] * b[k];
        }
        b[i] = x / l[(i, i)];
    }
}

/// Solves `L^T y = b` in place.
fn backward_subst_t(l: &DenseMatrix, b: &mut [f64]) {
    for i in (0..b.len()).rev() {
        let mut x = b[i];
        for k in i + 1..b.len() {
            x -= l[(k, i)] * b[k];
        }
        b[i] = x / l[(i, i)];
    }
}

/// Finite eigenpairs of the symmetric-definite pencil `F f = mu G f`.
#[derive(Clone, Debug)]
pub struct PencilEig {
    /// Sorted by `|mu|` descending (stable with respect to ascending `mu`).
    pub mu: Vec<f64>,
    /// Unit eigenvectors, column `j` pairing with `mu[j]`.
    pub vectors: DenseMatrix,
    /// True when `G` failed Cholesky and the truncated reduction was used.
    pub truncated: bool,
}

/// Solves `F f = mu G f` with `F` symmetric and `G` symmetric positive (semi)definite.
pub fn sym_definite_gen_eig(f: &DenseMatrix, g: &DenseMatrix) -> Result<PencilEig> {
    let n = f.nrows();
    assert!(f.ncols() == n && g.nrows() == n && g.ncols() == n, "pencil shape");
    let mut fs = f.clone();
    fs.symmetrize();

    let (mu, mut vecs, truncated) = match cholesky(g) {
        Some(l) => {
            // S = L^{-1} F L^{-T}
            let mut x = fs.clone();
            for j in 0..n {
                forward_subst(&l, x.col_mut(j));
            }
            let mut s = x.transpose();
            for j in 0..n {
                forward_subst(&l, s.col_mut(j));
            }
            let eig = sym_eig(&s)?;
            let mut vecs = eig.vectors;
            for j in 0..n {
                backward_subst_t(&l, vecs.col_mut(j));
            }
            (eig.values, vecs, false)
        }
        None => {
            let ge = sym_eig(g)?;
            let lmax = ge.values.last().copied().unwrap_or(0.0);
            if !(lmax > 0.0) {
                return Err(JdsvdError::DegeneratePencil);
            }
            let keep: Vec<usize> = (0..n)
                .filter(|&i| ge.values[i] > PENCIL_TRUNCATION * lmax)
                .collect();
            if keep.is_empty() {
                return Err(JdsvdError::DegeneratePencil);
            }
            let mut w = DenseMatrix::with_capacity(n, keep.len());
            for &i in &keep {
                let mut c = ge.vectors.col(i).to_vec();
                vecops::scale(1.0 / ge.values[i].sqrt(), &mut c);
                w.push_col(&c);
            }
            let s = w.t_matmul(&fs.matmul(&w));
            let eig = sym_eig(&s)?;
            (eig.values, w.matmul(&eig.vectors), true)
        }
    };
    for j in 0..vecs.ncols() {
        vecops::normalize(vecs.col_mut(j));
    }
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&i, &j| mu[j].abs().total_cmp(&mu[i].abs()));
    let mut vectors = DenseMatrix::with_capacity(n, order.len());
    for &i in &order {
        vectors.push_col(vecs.col(i));
    }
    Ok(PencilEig {
        mu: order.iter().map(|&i| mu[i]).collect(),
        vectors,
        truncated,
    })
}

/// Thin SVD `A = U diag(sigma) V^T` with `p = min(M, N)` triplets.
#[derive(Clone, Debug)]
pub struct DenseSvd {
    /// Nonnegative, descending.
    pub sigma: Vec<f64>,
    /// `M x p`, orthonormal.
    pub u: DenseMatrix,
    /// `N x p`, orthonormal.
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn dense_svd(a: &DenseMatrix) -> Result<DenseSvd> {
    if a.nrows() < a.ncols() {
        let t = dense_svd(&a.transpose())?;
        return Ok(DenseSvd {
            sigma: t.sigma,
            u: t.v,
            v: t.u,
        });
    }
    let (m, n) = (a.nrows(), a.ncols());
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    let mut norms: Vec<f64> = w.cols().map(|c| vecops::dot(c, c)).collect();

    let mut sweep = 0;
    loop {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let (alpha, beta) = (norms[i], norms[j]);
                let gamma = vecops::dot(w.col(i), w.col(j));
                if gamma.abs() <= EPS * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate_cols(&mut w, i, j, c, s);
                rotate_cols(&mut v, i, j, c, s);
                norms[i] = vecops::dot(w.col(i), w.col(i));
                norms[j] = vecops::dot(w.col(j), w.col(j));
            }
        }
        if !rotated {
            break;
        }
        sweep += 1;
        if sweep == MAX_SVD_SWEEPS {
            return Err(JdsvdError::SvdNoConvergence(MAX_SVD_SWEEPS));
        }
    }

    let sig: Vec<f64> = w.cols().map(vecops::norm2).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]));
    let smax = order.first().map_or(0.0, |&i| sig[i]);

    let mut u = DenseMatrix::with_capacity(m, n);
    let mut vv = DenseMatrix::with_capacity(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut deferred = Vec::new();
    for &i in &order {
        sigma.push(sig[i]);
        vv.push_col(v.col(i));
        if sig[i] > 1e-13 * smax && sig[i] > 0.0 {
            let mut c = w.col(i).to_vec();
            vecops::scale(1.0 / sig[i], &mut c);
            u.push_col(&c);
        } else {
            deferred.push(u.ncols());
            u.push_col(&vec![0.0; m]);
        }
    }
    // left vectors of (numerically) zero singular values: any orthonormal completion
    let mut next_e = 0;
    for slot in deferred {
        loop {
            assert!(next_e < m, "ran out of completion candidates");
            let mut e = vec![0.0; m];
            e[next_e] = 1.0;
            next_e += 1;
            if let Orthonormalized::Unit { vector, .. } = orthonormalize_against(&e, &u) {
                u.col_mut(slot).copy_from_slice(&vector);
                break;
            }
        }
    }
    Ok(DenseSvd { sigma, u, v: vv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        let mut s = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        s.symmetrize();
        s
    }

    fn eig_residual(s: &DenseMatrix, r: &EigResult) -> f64 {
        (0..r.values.len())
            .map(|j| {
                let x = r.vectors.col(j);
                let mut sx = s.mul_vec(x);
                vecops::axpy(-r.values[j], x, &mut sx);
                vecops::norm2(&sx)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_by_two_cases() {
        let r = sym_eig(&DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(r.values, vec![1.0, 2.0]);
        assert_eq!(r.vectors.col(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 1.0]);

        let r = sym_eig(&DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((r.values[0] + 1.0).abs() < 1e-15 && (r.values[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x0 = r.vectors.col(0);
        assert!((x0[0].abs() - h).abs() < 1e-15 && (x0[0] + x0[1]).abs() < 1e-15);
        let x1 = r.vectors.col(1);
        assert!((x1[0] - x1[1]).abs() < 1e-15);
    }

    #[test]
    fn random_symmetric_20() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_sym(&mut rng, 20);
        let r = sym_eig(&s).unwrap();
        let norm = s.frobenius();
        assert!(eig_residual(&s, &r) <= 1e-12 * norm);
        assert!(r.vectors.orthonormality_error() <= 1e-12);
        let trace: f64 = (0..20).map(|i| s[(i, i)]).sum();
        assert!((r.values.iter().sum::<f64>() - trace).abs() <= 1e-12 * norm * 20.0);
        assert!(r.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tridiagonal_ql_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &n in &[1usize, 2, 3, 7, 30] {
            let s = random_sym(&mut rng, n);
            let a = sym_eig(&s).unwrap().values;
            let b = sym_eigenvalues(&s).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12 * s.frobenius().max(1.0), "{n}: {x} vs {y}");
            }
        }
        // diagonal input passes straight through
        let d = DenseMatrix::from_rows(&[&[3.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, 2.0]]);
        assert_eq!(sym_eigenvalues(&d).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn pencil_trivial_cases() {
        let f = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let p = sym_definite_gen_eig(&f, &DenseMatrix::identity(2)).unwrap();
        assert!((p.mu[0] - 3.0).abs() < 1e-15 && (p.mu[1] - 2.0).abs() < 1e-15);
        assert!((p.vectors.col(0)[1].abs() - 1.0).abs() < 1e-15);

        let f = DenseMatrix::identity(2);
        let g = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 4.0]]);
        let p = sym_definite_gen_eig(&f, &g).unwrap();
        assert!((p.mu[0] - 1.0).abs() < 1e-15 && (p.mu[1] - 0.25).abs() < 1e-15);
        assert!(!p.truncated);
    }

    #[test]
    fn pencil_identity_g_equals_sym_eig() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_sym(&mut rng, 9);
        let p = sym_definite_gen_eig(&f, &DenseMatrix::identity(9)).unwrap();
        let e = sym_eig(&f).unwrap();
        for (j, &mu) in p.mu.iter().enumerate() {
            let k = e.values.iter().position(|&l| (l - mu).abs() < 1e-12).unwrap();
            let c = vecops::dot(p.vectors.col(j), e.vectors.col(k)).abs();
            assert!((c - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn semidefinite_g_uses_truncation() {
        // G singular along e3; that direction carries no finite eigenvalue
        let f = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]);
        let g = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let p = sym_definite_gen_eig(&f, &g).unwrap();
        assert!(p.truncated);
        assert_eq!(p.mu.len(), 2);
        assert!((p.mu[0] - 2.0).abs() < 1e-14 && (p.mu[1] - 1.0).abs() < 1e-14);
        assert!(matches!(
            sym_definite_gen_eig(&f, &DenseMatrix::zeros(3, 3)),
            Err(JdsvdError::DegeneratePencil)
        ));
    }

    #[test]
    fn svd_examples() {
        let s = dense_svd(&DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, 4.0]])).unwrap();
        assert_eq!(s.sigma, vec![4.0, 3.0]);

        let u = [2.0, 0.0, 0.0, 0.0];
        let v = [0.0, 3.0, 0.0];
        let a = DenseMatrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let s = dense_svd(&a).unwrap();
        assert!((s.sigma[0] - 6.0).abs() < 1e-14);
        assert!(s.sigma[1..].iter().all(|&x| x == 0.0));
        assert!(s.u.orthonormality_error() < 1e-14);
    }

    fn check_svd(a: &DenseMatrix, s: &DenseSvd) {
        let norm = s.sigma[0];
        let mut recon = DenseMatrix::zeros(a.nrows(), a.ncols());
        for k in 0..s.sigma.len() {
            let uk = s.u.col(k);
            let vk = s.v.col(k);
            let mut av = a.mul_vec(vk);
            vecops::axpy(-s.sigma[k], uk, &mut av);
            assert!(vecops::norm2(&av) <= 1e-12 * norm);
            let mut atu = a.t_mul_vec(uk);
            vecops::axpy(-s.sigma[k], vk, &mut atu);
            assert!(vecops::norm2(&atu) <= 1e-12 * norm);
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    recon[(i, j)] += s.sigma[k] * uk[i] * vk[j];
                }
            }
        }
        let mut diff = 0.0_f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                diff = diff.max((recon[(i, j)] - a[(i, j)]).abs());
            }
        }
        assert!(diff <= 1e-11 * norm);
        assert!(s.u.orthonormality_error() < 1e-12);
        assert!(s.v.orthonormality_error() < 1e-12);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.sigma.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn svd_random_tall_and_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DenseMatrix::from_fn(60, 40, |_, _| rng.random_range(-1.0..1.0));
        check_svd(&a, &dense_svd(&a).unwrap());
        let b = a.transpose();
        let s = dense_svd(&b).unwrap();
        assert_eq!((s.u.nrows(), s.v.nrows()), (40, 60));
        check_svd(&b, &s);
    }

    mod props {
        use super::{random_sym, eig_residual, sym_eig, sym_definite_gen_eig, vecops, DenseMatrix};
        use proptest::prelude::*;
        use rand::{Rng as _, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn sym_eig_trace_and_orthonormality(seed in any::<u64>(), n in 1usize..16) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_sym(&mut rng, n);
                let r = sym_eig(&s).unwrap();
                let norm = s.frobenius().max(1e-300);
                let trace: f64 = (0..n).map(|i| s[(i, i)]).sum();
                prop_assert!((r.values.iter().sum::<f64>() - trace).abs() <= 1e-12 * norm * n as f64);
                prop_assert!(r.vectors.orthonormality_error() <= 1e-12);
                prop_assert!(eig_residual(&s, &r) <= 1e-12 * norm);
            }

            #[test]
            fn pencil_residual_bound(seed in any::<u64>(), n in 1usize..12) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_sym(&mut rng, n);
                let m = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let mut g = m.t_matmul(&m);
                for i in 0..n { g[(i, i)] += 0.1; }
                let p = sym_definite_gen_eig(&f, &g).unwrap();
                let (fn_, gn) = (f.frobenius(), g.frobenius());
                for j in 0..p.mu.len() {
                    let x = p.vectors.col(j);
                    let mut r = f.mul_vec(x);
                    vecops::axpy(-p.mu[j], &g.mul_vec(x), &mut r);
                    prop_assert!(vecops::norm2(&r) <= 1e-10 * (fn_ + p.mu[j].abs() * gn));
                    prop_assert!((vecops::norm2(x) - 1.0).abs() < 1e-14);
                }
                prop_assert!(p.mu.windows(2).all(|w| w[0].abs() >= w[1].abs()));
            }
        }
    }
}

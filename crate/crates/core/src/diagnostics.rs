//! Dense, desk-scale checks of the accuracy theory that drives the inner tolerance.
//!
//! Everything here uses the full SVD of `A`, so `B = K^{-1}` with
//! `K = [[-tau I, A], [A^T, -tau I]]` is applied exactly through the eigenpairs
//! `([u_i; ±v_i] / sqrt 2, ±sigma_i - tau)` of `K`; every remaining direction has
//! eigenvalue `-tau`. Matrices with `M + N` above [`DESK_CAP`] are refused.
//!
//! Quantities that are undefined for an iteration are stored as NaN.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::correction::ProjectedOperator;
use crate::dense::DenseMatrix;
use crate::driver::{solve_observed, InnerSnapshot, Observer, Solution, SolverConfig};
use crate::eig::{dense_svd, sym_eigenvalues, DenseSvd};
use crate::error::{JdsvdError, Result};
use crate::sparse::{project_out, SparseMatrix};
use crate::vecops;

pub const DESK_CAP: usize = 1200;
/// Errors below this are not resolvable against the rounding in the exact solution.
pub const RESOLVABLE_EPS: f64 = 1e-10;
/// Perpendicular components below this make the expansion identities degenerate.
pub const PERP_FLOOR: f64 = 1e-10;
/// Ratio identities are compared only when the subspace angle exceeds this.
pub const RATIO_FLOOR: f64 = 1e-6;
/// Relative residual level below which refined and harmonic vectors are not compared.
pub const CROSS_PRODUCT_FLOOR: f64 = 1e-6;

/// Full SVD of a desk-scale matrix and exact application of `B`.
#[derive(Clone, Debug)]
pub struct Oracle {
    a: SparseMatrix,
    svd: DenseSvd,
    tau: f64,
}

impl Oracle {
    pub fn new(a: &SparseMatrix, tau: f64) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m + n > DESK_CAP {
            return Err(JdsvdError::TooLarge {
                nrows: m,
                ncols: n,
                cap: DESK_CAP,
            });
        }
        let svd = dense_svd(&a.to_dense())?;
        let na = svd.sigma[0].max(f64::MIN_POSITIVE);
        if let Some(s) = svd.sigma.iter().find(|&&s| (s - tau).abs() <= 1e-14 * na) {
            return Err(JdsvdError::SingularSystem(format!(
                "tau = {tau} coincides with the singular value {s}"
            )));
        }
        Ok(Oracle {
            a: a.clone(),
            svd,
            tau,
        })
    }

    pub fn svd(&self) -> &DenseSvd {
        &self.svd
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Spectral norm `sigma_1`.
    pub fn norm2(&self) -> f64 {
        self.svd.sigma[0]
    }

    /// Indices of singular values ordered by `|sigma - tau|`, ties by index.
    pub fn order_by_distance(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.svd.sigma.len()).collect();
        idx.sort_by(|&i, &j| {
            let (di, dj) = ((self.svd.sigma[i] - self.tau).abs(), (self.svd.sigma[j] - self.tau).abs());
            di.total_cmp(&dj).then(i.cmp(&j))
        });
        idx
    }

    /// Oracle indices matched to converged values, each to the nearest unused `sigma`.
    pub fn match_deflated(&self, thetas: &[f64]) -> Vec<usize> {
        let mut used = Vec::with_capacity(thetas.len());
        for &th in thetas {
            let best = (0..self.svd.sigma.len())
                .filter(|i| !used.contains(i))
                .min_by(|&i, &j| {
                    (self.svd.sigma[i] - th).abs().total_cmp(&(self.svd.sigma[j] - th).abs())
                });
            if let Some(b) = best {
                used.push(b);
            }
        }
        used
    }

    /// The singular value closest to `tau` among those not in `deflated`.
    pub fn target(&self, deflated: &[usize]) -> usize {
        *self
            .order_by_distance()
            .iter()
            .find(|i| !deflated.contains(i))
            .expect("every singular value is deflated")
    }

    /// `B x`.
    pub fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        let m = self.a.nrows();
        let (xs, xt) = x.split_at(m);
        let a = self.svd.u.t_mul_vec(xs);
        let b = self.svd.v.t_mul_vec(xt);
        let inv_tau = -1.0 / self.tau;
        // remainder outside span{[u_i; 0], [0; v_i]} has eigenvalue -1/tau
        let mut out: Vec<f64> = x.iter().map(|e| inv_tau * e).collect();
        let mut cu = vec![0.0; a.len()];
        let mut cv = vec![0.0; a.len()];
        for i in 0..a.len() {
            let s = self.svd.sigma[i];
            let plus = (a[i] + b[i]) / (2.0 * (s - self.tau));
            let minus = (a[i] - b[i]) / (2.0 * (-s - self.tau));
            cu[i] = plus + minus - inv_tau * a[i];
            cv[i] = plus - minus - inv_tau * b[i];
        }
        let (top, bot) = out.split_at_mut(m);
        vecops::axpy(1.0, &self.svd.u.mul_vec(&cu), top);
        vecops::axpy(1.0, &self.svd.v.mul_vec(&cv), bot);
        out
    }

    /// Eigenvalues of `B` on the complement of the target pair `w` and of every
    /// deflated pair `([u_i; 0], [0; v_i])`.
    pub fn l_spectrum(&self, target: usize, deflated: &[usize]) -> Vec<f64> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        let p = self.svd.sigma.len();
        let mut ev = Vec::with_capacity(m + n);
        for i in 0..p {
            if deflated.contains(&i) {
                continue;
            }
            let s = self.svd.sigma[i];
            if i != target {
                ev.push(1.0 / (s - self.tau));
            }
            ev.push(1.0 / (-s - self.tau));
        }
        if m + n > 2 * p {
            ev.extend(std::iter::repeat_n(-1.0 / self.tau, m + n - 2 * p));
        }
        ev
    }

    /// `sep(gamma, L) = min |lambda - gamma|` over the spectrum of `L`.
    pub fn sep(&self, gamma: f64, target: usize, deflated: &[usize]) -> f64 {
        self.l_spectrum(target, deflated)
            .iter()
            .map(|l| (l - gamma).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `‖B‖` restricted to the complement of the deflated pairs.
    pub fn b_norm_undeflated(&self, target: usize, deflated: &[usize]) -> f64 {
        let s = self.svd.sigma[target];
        self.l_spectrum(target, deflated)
            .iter()
            .map(|l| l.abs())
            .fold((1.0 / (s - self.tau)).abs(), f64::max)
    }
}

/// Solves `Pi K Pi x = rhs` for `x` doubly orthogonal to `(Q, Z)` through `B`:
/// `x = B (rhs + Y c)` with `Y = blockdiag(Q, Z)` and `c` fixed by `Y^T x = 0`.
pub fn solve_projected(
    oracle: &Oracle,
    rhs: &[f64],
    q: &DenseMatrix,
    z: &DenseMatrix,
) -> Result<Vec<f64>> {
    let m = q.nrows();
    let n = rhs.len();
    let mut ys = Vec::with_capacity(q.ncols() + z.ncols());
    for c in q.cols() {
        let mut y = c.to_vec();
        y.resize(n, 0.0);
        ys.push(y);
    }
    for c in z.cols() {
        let mut y = vec![0.0; m];
        y.extend_from_slice(c);
        ys.push(y);
    }
    let by: Vec<Vec<f64>> = ys.iter().map(|y| oracle.apply_b(y)).collect();
    let brhs = oracle.apply_b(rhs);
    let w = ys.len();
    let mut s = DenseMatrix::zeros(w, w);
    let mut g = vec![0.0; w];
    for i in 0..w {
        for j in 0..w {
            s[(i, j)] = vecops::dot(&ys[i], &by[j]);
        }
        g[i] = -vecops::dot(&ys[i], &brhs);
    }
    let c = solve_linear(s, g)?;
    let mut x = brhs;
    for (ci, byi) in c.iter().zip(&by) {
        vecops::axpy(*ci, byi, &mut x);
    }
    Ok(x)
}

/// Gaussian elimination with partial pivoting on a small dense system.
pub fn solve_linear(mut a: DenseMatrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .unwrap();
        if a[(p, k)].abs() <= 1e-14 * scale {
            return Err(JdsvdError::SingularSystem(format!("pivot {k} vanishes")));
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[(k, j)] * b[j];
        }
        b[k] = acc / a[(k, k)];
    }
    Ok(b)
}

/// Exact solution of the correction equation with its `alpha`, `beta`.
#[derive(Clone, Debug)]
pub struct ExactCorrection {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `‖Pi K Pi [s; t] - rhs‖`.
    pub system_residual: f64,
    /// Gap between `[s; t]` and `-[u; v] + B [alpha u; beta v]`, relative to
    /// `max(‖[s; t]‖, ‖[u; v]‖)`.
    pub fixed_point_residual: f64,
}

fn stack(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.extend_from_slice(y);
    v
}

fn hstack(a: &DenseMatrix, x: &[f64]) -> DenseMatrix {
    let mut out = DenseMatrix::with_capacity(a.nrows(), a.ncols() + 1);
    for c in a.cols() {
        out.push_col(c);
    }
    out.push_col(x);
    out
}

fn exact_from_rhs(
    oracle: &Oracle,
    theta: f64,
    u: &[f64],
    v: &[f64],
    rhs: &[f64],
    q: DenseMatrix,
    z: DenseMatrix,
) -> Result<ExactCorrection> {
    let a = &oracle.a;
    let m = a.nrows();
    let tau = oracle.tau;
    let x = solve_projected(oracle, rhs, &q, &z)?;
    let op = ProjectedOperator::new(a, tau, q, z)?;
    let res = vecops::norm2(&vecops::sub(&op.apply(&x), rhs));
    let (s, t) = x.split_at(m);
    let alpha = theta - tau + vecops::dot(u, &a.apply(t)?);
    let beta = theta - tau + vecops::dot(v, &a.apply_transpose(s)?);
    let mut fp = oracle.apply_b(&stack(
        &u.iter().map(|e| alpha * e).collect::<Vec<_>>(),
        &v.iter().map(|e| beta * e).collect::<Vec<_>>(),
    ));
    vecops::axpy(-1.0, &stack(u, v), &mut fp);
    // relative to the larger of the two terms, since they cancel near convergence
    let scale = vecops::norm2(&x).max(vecops::norm2(&stack(u, v)));
    let fixed_point_residual = vecops::norm2(&vecops::sub(&fp, &x)) / scale;
    Ok(ExactCorrection {
        s: s.to_vec(),
        t: t.to_vec(),
        alpha,
        beta,
        system_residual: res,
        fixed_point_residual,
    })
}

/// Exact correction for the triplet approximation `(theta, u, v)` after deflating
/// `(U_c, V_c)`: right-hand side `-r_p`, projectors `Q = [U_c, u]`, `Z = [V_c, v]`.
pub fn exact_correction_solution(
    oracle: &Oracle,
    theta: f64,
    u: &[f64],
    v: &[f64],
    uc: &DenseMatrix,
    vc: &DenseMatrix,
) -> Result<ExactCorrection> {
    let (r, _) = crate::extraction::residual(&oracle.a, theta, u, v)?;
    let mut rhs = crate::driver::projected_residual(&r, uc, vc);
    vecops::scale(-1.0, &mut rhs);
    exact_from_rhs(oracle, theta, u, v, &rhs, hstack(uc, u), hstack(vc, v))
}

/// Relative errors of an approximate correction against the exact one.
#[derive(Clone, Debug)]
pub struct ErrorMetrics {
    pub eps: f64,
    pub eps_s: f64,
    pub eps_t: f64,
    pub eps_tilde: f64,
    pub eps_hat: f64,
    /// Normalized error direction.
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub g_perp: Vec<f64>,
    pub h_perp: Vec<f64>,
}

/// `(I - U U^T) x`, two passes.
fn perp(x: &[f64], basis: &DenseMatrix) -> Vec<f64> {
    let mut y = x.to_vec();
    project_out(&mut y, &[basis]);
    project_out(&mut y, &[basis]);
    y
}

/// Returns `None` when the exact correction or one of its projections vanishes.
pub fn expansion_error_metrics(
    s: &[f64],
    t: &[f64],
    s_tilde: &[f64],
    t_tilde: &[f64],
    u_basis: &DenseMatrix,
    v_basis: &DenseMatrix,
) -> Option<ErrorMetrics> {
    let nst = vecops::norm2(&stack(s, t));
    let ps = perp(s, u_basis);
    let pt = perp(t, v_basis);
    let (nps, npt) = (vecops::norm2(&ps), vecops::norm2(&pt));
    if nst == 0.0 || nps == 0.0 || npt == 0.0 {
        return None;
    }
    let es = vecops::sub(s_tilde, s);
    let et = vecops::sub(t_tilde, t);
    let err = vecops::norm2(&stack(&es, &et));
    let eps = err / nst;
    let pes = perp(&es, u_basis);
    let pet = perp(&et, v_basis);
    let eps_s = vecops::norm2(&pes) / nps;
    let eps_t = vecops::norm2(&pet) / npt;
    let eps_hat = vecops::norm2(&stack(&pes, &pet)) / vecops::norm2(&stack(&ps, &pt));
    let unit = |x: &[f64]| -> Vec<f64> {
        if err > 0.0 {
            x.iter().map(|e| e / err).collect()
        } else {
            vec![0.0; x.len()]
        }
    };
    Some(ErrorMetrics {
        eps,
        eps_s,
        eps_t,
        eps_tilde: eps_s.max(eps_t),
        eps_hat,
        g: unit(&es),
        h: unit(&et),
        g_perp: unit(&pes),
        h_perp: unit(&pet),
    })
}

/// One side of the subspace expansion identities.
#[derive(Clone, Debug)]
pub struct SideExpansion {
    /// `sin angle(U, x*)`
    pub sin_sub: f64,
    /// `sin angle(x_+, x*_perp)` for the exact expansion vector.
    pub sin_plus_perp: f64,
    /// Same for the inexact expansion vector.
    pub sin_tilde_perp: f64,
    /// `sin angle([U, x_+], x*)`
    pub sin_sub_plus: f64,
    /// `sin angle([U, x~_+], x*)`
    pub sin_sub_tilde_plus: f64,
    /// `|sin_sub_plus - sin_sub * sin_plus_perp|`
    pub identity_residual: f64,
    /// Ratio identity residual; NaN when the exact expanded angle is below [`RATIO_FLOOR`].
    pub ratio_residual: f64,
    /// `sin_sub_tilde_plus / sin_sub_plus`; NaN when undefined.
    pub ratio: f64,
    /// Relative error of the projected expansion vector.
    pub eps_side: f64,
    /// `2 eps_side / sin_plus_perp`
    pub tau_side: f64,
}

fn sin_to_span(x: &[f64], basis: &DenseMatrix, extra: &[f64]) -> f64 {
    let mut y = x.to_vec();
    let b2 = DenseMatrix::from_cols(extra.len(), &[extra.to_vec()]);
    for _ in 0..2 {
        project_out(&mut y, &[basis]);
        project_out(&mut y, &[&b2]);
    }
    vecops::norm2(&y) / vecops::norm2(x)
}

/// Expansion identities for basis `U` (orthonormal), exact correction side `s`,
/// inexact `s_tilde` and target vector `x*` (unit). `None` when a perpendicular
/// component falls below [`PERP_FLOOR`].
pub fn side_expansion(
    basis: &DenseMatrix,
    s: &[f64],
    s_tilde: &[f64],
    target: &[f64],
) -> Option<SideExpansion> {
    let mut plus = perp(s, basis);
    let mut tilde = perp(s_tilde, basis);
    let target_perp = perp(target, basis);
    let sin_sub = vecops::norm2(&target_perp);
    let nps = vecops::normalize(&mut plus);
    let eps_side = vecops::norm2(&vecops::sub(&perp(s_tilde, basis), &perp(s, basis))) / nps;
    if nps <= PERP_FLOOR || sin_sub <= PERP_FLOOR || vecops::normalize(&mut tilde) <= PERP_FLOOR {
        return None;
    }
    let sin_plus_perp = vecops::sin_angle(&plus, &target_perp);
    let sin_tilde_perp = vecops::sin_angle(&tilde, &target_perp);
    if sin_plus_perp <= PERP_FLOOR {
        return None;
    }
    let sin_sub_plus = sin_to_span(target, basis, &plus);
    let sin_sub_tilde_plus = sin_to_span(target, basis, &tilde);
    let identity_residual = (sin_sub_plus - sin_sub * sin_plus_perp).abs();
    let (ratio, ratio_residual) = if sin_sub_plus > RATIO_FLOOR {
        let ratio = sin_sub_tilde_plus / sin_sub_plus;
        (ratio, (ratio - sin_tilde_perp / sin_plus_perp).abs())
    } else {
        (f64::NAN, f64::NAN)
    };
    Some(SideExpansion {
        sin_sub,
        sin_plus_perp,
        sin_tilde_perp,
        sin_sub_plus,
        sin_sub_tilde_plus,
        identity_residual,
        ratio_residual,
        ratio,
        eps_side,
        tau_side: 2.0 * eps_side / sin_plus_perp,
    })
}

/// Condition number of `B'` when the current pair equals the exact one and the
/// deflated triplets are exact: `(sigma_max + tau) / |sigma_{k+2} - tau|` with the
/// `sigma`s ordered by distance to `tau` and `sigma_max` the largest from position
/// `k + 2` on. Infinite when `sigma_{k+2} = tau`.
pub fn kappa_b_prime(sigmas: &[f64], tau: f64, k: usize) -> Result<f64> {
    if k + 2 > sigmas.len() {
        return Err(JdsvdError::Precondition(format!(
            "need at least {} singular values, got {}",
            k + 2,
            sigmas.len()
        )));
    }
    let mut s = sigmas.to_vec();
    s.sort_by(|x, y| (x - tau).abs().total_cmp(&(y - tau).abs()));
    let rest = &s[k + 1..];
    let smax = rest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let den = (rest[0] - tau).abs();
    Ok(if den == 0.0 {
        f64::INFINITY
    } else {
        (smax + tau) / den
    })
}

/// Condition number of `Pi K Pi` on the double-orthogonal complement of `(Q, Z)`,
/// from the dense operator with the `2 * width` kernel eigenvalues dropped.
pub fn projected_condition(op: &ProjectedOperator) -> Result<f64> {
    let ev = sym_eigenvalues(&op.to_dense())?;
    let mut mag: Vec<f64> = ev.iter().map(|x| x.abs()).collect();
    mag.sort_by(f64::total_cmp);
    let drop = op.q().ncols() + op.z().ncols();
    let kept = &mag[drop.min(mag.len())..];
    match (kept.first(), kept.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => Ok(hi / lo),
        _ => Ok(f64::INFINITY),
    }
}

/// `min ‖(C - rho I) W z‖` over unit `z`, evaluated directly from the cached
/// blocks at the smallest eigenvector of `G'(rho)`.
pub fn refined_minimum(state: &crate::extraction::SearchState, rho: f64) -> Result<f64> {
    let m = state.dim();
    let eig = crate::eig::sym_eig(&crate::extraction::shifted_cross_product(state, rho))?;
    let z = eig.vectors.col(0);
    let (c, d) = z.split_at(m);
    let mut top = state.av.mul_vec(d);
    vecops::axpy(-rho, &state.u.mul_vec(c), &mut top);
    let mut bot = state.atu.mul_vec(c);
    vecops::axpy(-rho, &state.v.mul_vec(d), &mut bot);
    Ok((vecops::dot(&top, &top) + vecops::dot(&bot, &bot)).sqrt())
}

/// Separation estimate from the harmonic values:
/// `min |1/(theta - tau) - 1/nu_i|` over eligible `nu_i`.
pub fn sep_estimate(nu_list: &[f64], selected: usize, tau: f64, theta: f64) -> f64 {
    nu_list
        .iter()
        .enumerate()
        .filter(|&(i, &nu)| i != selected && nu.is_finite() && nu + tau > 0.0 && nu != 0.0)
        .map(|(_, &nu)| (1.0 / (theta - tau) - 1.0 / nu).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Per-iteration theory quantities.
#[derive(Clone, Debug)]
pub struct DiagnosticsRecord {
    pub outer: usize,
    pub triplet: usize,
    pub k: usize,
    pub sigma: f64,
    pub theta: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub eps_s: f64,
    pub eps_t: f64,
    pub eps_tilde: f64,
    pub eps_hat: f64,
    /// `sqrt(‖g_perp‖^2 + ‖h_perp‖^2)`
    pub gh_perp: f64,
    pub delta: f64,
    pub sep: f64,
    pub sep_estimate: f64,
    pub sin_phi: f64,
    pub sin_psi: f64,
    pub sin_max: f64,
    pub sin_sub_u: f64,
    pub sin_sub_v: f64,
    pub sin_plus_perp_u: f64,
    pub sin_plus_perp_v: f64,
    pub ratio_u: f64,
    pub ratio_v: f64,
    pub kappa: f64,
    pub kappa_asymptotic: f64,
    pub r_in: f64,
    pub eta: f64,
    pub norm_st: f64,
}

/// One checked inequality. Only rows with `hypothesis_met` count as failures.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub outer: usize,
    pub triplet: usize,
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub hypothesis_met: bool,
}

pub const VERIFY_HEADER: &str = "outer,triplet,name,lhs,rhs,pass,hypothesis_met";

pub fn write_verify_csv(rows: &[CheckRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| JdsvdError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    (|| -> std::io::Result<()> {
        writeln!(w, "{VERIFY_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{:.16e},{:.16e},{},{}",
                r.outer,
                r.triplet,
                r.name,
                r.lhs,
                r.rhs,
                u8::from(r.pass),
                u8::from(r.hypothesis_met)
            )?;
        }
        w.flush()
    })()
    .map_err(io)
}

/// [`Observer`] that evaluates every check after each inner solve.
pub struct Verifier {
    oracle: Oracle,
    pub records: Vec<DiagnosticsRecord>,
    pub rows: Vec<CheckRow>,
    /// Iterations whose exact solution could not be formed.
    pub skipped: Vec<(usize, String)>,
    /// Whether to form the dense projected operator for its condition number.
    pub dense_kappa: bool,
}

impl Verifier {
    pub fn new(a: &SparseMatrix, tau: f64) -> Result<Self> {
        Ok(Verifier {
            oracle: Oracle::new(a, tau)?,
            records: Vec::new(),
            rows: Vec::new(),
            skipped: Vec::new(),
            dense_kappa: true,
        })
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    /// Rows whose hypotheses hold but whose inequality fails.
    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.hypothesis_met && !r.pass)
    }

    fn push(&mut self, outer: usize, triplet: usize, name: &'static str, lhs: f64, rhs: f64, hyp: bool) {
        self.rows.push(CheckRow {
            outer,
            triplet,
            name,
            lhs,
            rhs,
            pass: lhs <= rhs,
            hypothesis_met: hyp,
        });
    }

    fn inspect(&mut self, snap: &InnerSnapshot) -> Result<()> {
        let oracle = &self.oracle;
        let a = &oracle.a;
        let tau = oracle.tau;
        let na = oracle.norm2();
        let defl = snap.deflation;
        let k = defl.len();
        let deflated = oracle.match_deflated(&defl.theta);
        let target = oracle.target(&deflated);
        let sigma = oracle.svd.sigma[target];
        let ustar = oracle.svd.u.col(target).to_vec();
        let vstar = oracle.svd.v.col(target).to_vec();
        let theta = snap.extraction.theta;
        let (u, v) = (snap.u, snap.v);
        let rep = snap.report;
        let (outer, trip) = (snap.outer, k + 1);

        let q = hstack(&defl.u, u);
        let z = hstack(&defl.v, v);
        let ex = exact_from_rhs(oracle, theta, u, v, snap.rhs, q.clone(), z.clone())?;
        let rhs_norm = vecops::norm2(snap.rhs);
        let alpha = ex.alpha;
        let beta = ex.beta;
        let norm_st = vecops::norm2(&ex.s) + vecops::norm2(&ex.t);

        let metrics = expansion_error_metrics(&ex.s, &ex.t, &rep.s, &rep.t, &snap.state.u, &snap.state.v);
        let sin_phi = vecops::sin_angle(u, &ustar);
        let sin_psi = vecops::sin_angle(v, &vstar);
        let sin_max = sin_phi.max(sin_psi);
        let dist = (sigma - tau).abs();
        let closest = oracle.b_norm_undeflated(target, &deflated) * dist <= 1.0 + 1e-12;

        let uv = stack(u, v);
        let nab = (alpha * alpha + beta * beta).sqrt();
        let gamma = (theta - tau).signum() * std::f64::consts::SQRT_2 / nab;
        let buv = oracle.apply_b(&uv);
        let num = {
            let mut y = buv;
            vecops::axpy(-gamma, &uv, &mut y);
            vecops::norm2(&y)
        };
        let bab = oracle.apply_b(&stack(
            &u.iter().map(|e| alpha * gamma * e).collect::<Vec<_>>(),
            &v.iter().map(|e| beta * gamma * e).collect::<Vec<_>>(),
        ));
        let den = vecops::norm2(&vecops::sub(&bab, &uv.iter().map(|e| gamma * e).collect::<Vec<_>>()));
        let delta = num / den;
        let sep = oracle.sep(gamma, target, &deflated);
        // ‖B [alpha u; beta v] - [u; v]‖
        let nb = {
            let mut y = oracle.apply_b(&stack(
                &u.iter().map(|e| alpha * e).collect::<Vec<_>>(),
                &v.iter().map(|e| beta * e).collect::<Vec<_>>(),
            ));
            vecops::axpy(-1.0, &uv, &mut y);
            vecops::norm2(&y)
        };

        let kappa = if self.dense_kappa {
            projected_condition(&ProjectedOperator::new(a, tau, q, z)?)?
        } else {
            f64::NAN
        };
        let kappa_asymptotic = kappa_b_prime(&oracle.svd.sigma, tau, k).unwrap_or(f64::NAN);
        let sep_est = sep_estimate(&snap.extraction.nu_list, snap.extraction.selected, tau, theta);

        let su = side_expansion(&snap.state.u, &ex.s, &rep.s, &ustar);
        let sv = side_expansion(&snap.state.v, &ex.t, &rep.t, &vstar);

        let mut rec = DiagnosticsRecord {
            outer,
            triplet: trip,
            k,
            sigma,
            theta,
            s: ex.s.clone(),
            t: ex.t.clone(),
            alpha,
            beta,
            gamma,
            eps: f64::NAN,
            eps_s: f64::NAN,
            eps_t: f64::NAN,
            eps_tilde: f64::NAN,
            eps_hat: f64::NAN,
            gh_perp: f64::NAN,
            delta,
            sep,
            sep_estimate: sep_est,
            sin_phi,
            sin_psi,
            sin_max,
            sin_sub_u: su.as_ref().map_or(f64::NAN, |x| x.sin_sub),
            sin_sub_v: sv.as_ref().map_or(f64::NAN, |x| x.sin_sub),
            sin_plus_perp_u: su.as_ref().map_or(f64::NAN, |x| x.sin_plus_perp),
            sin_plus_perp_v: sv.as_ref().map_or(f64::NAN, |x| x.sin_plus_perp),
            ratio_u: su.as_ref().map_or(f64::NAN, |x| x.ratio),
            ratio_v: sv.as_ref().map_or(f64::NAN, |x| x.ratio),
            kappa,
            kappa_asymptotic,
            r_in: rep.r_in,
            eta: rep.eta,
            norm_st,
        };

        self.push(outer, trip, "exact_solution_residual", ex.system_residual, 1e-10 * na * rhs_norm.max(f64::MIN_POSITIVE), true);
        self.push(outer, trip, "fixed_point_form", ex.fixed_point_residual, 1e-8, k == 0);
        self.push(
            outer,
            trip,
            "alpha_quadratic_estimate",
            (alpha - (theta - tau)).abs(),
            (na + sigma) * vecops::norm2(&ex.t) * sin_max + 1e-14 * na * vecops::norm2(&ex.t),
            true,
        );
        self.push(
            outer,
            trip,
            "beta_quadratic_estimate",
            (beta - (theta - tau)).abs(),
            (na + sigma) * vecops::norm2(&ex.s) * sin_max + 1e-14 * na * vecops::norm2(&ex.s),
            true,
        );

        if let Some(mt) = &metrics {
            let gh = vecops::norm2(&stack(&mt.g, &mt.h));
            let gh_perp = vecops::norm2(&stack(&mt.g_perp, &mt.h_perp));
            rec.eps = mt.eps;
            rec.eps_s = mt.eps_s;
            rec.eps_t = mt.eps_t;
            rec.eps_tilde = mt.eps_tilde;
            rec.eps_hat = mt.eps_hat;
            rec.gh_perp = gh_perp;
            let resolvable = mt.eps > RESOLVABLE_EPS;
            self.push(outer, trip, "error_direction_unit", (gh * gh - 1.0).abs(), 1e-12, mt.eps > 0.0);
            self.push(outer, trip, "projected_error_le_side_max", mt.eps_hat, mt.eps_tilde + 1e-12, true);

            let hyp33 = closest && resolvable && gh_perp > 1e-12 && nb > 0.0;
            let rhs33 = 2.0 * nab * sin_max / (dist * nb * gh_perp) * mt.eps_tilde;
            self.push(outer, trip, "error_bound_angle_form", mt.eps, rhs33 * (1.0 + 1e-10), hyp33);

            let hyp35 = hyp33 && sep > 1e-14 * gamma.abs() && den > 0.0;
            let rhs35 = 2.0 * std::f64::consts::SQRT_2 * delta / (sep * dist * gh_perp) * mt.eps_tilde;
            self.push(outer, trip, "error_bound_separation_form", mt.eps, rhs35 * (1.0 + 1e-10), hyp35);

            if kappa.is_finite() {
                self.push(outer, trip, "residual_sandwich_lower", mt.eps / kappa, rep.r_in * (1.0 + 1e-8), resolvable);
                self.push(outer, trip, "residual_sandwich_upper", rep.r_in, kappa * mt.eps * (1.0 + 1e-8), resolvable);
            }
        }

        // refined vector against the harmonic one at the harmonic shift
        let harmonic = crate::extraction::harmonic_extract(snap.state, tau)?;
        let (_, _, _, hres) = crate::extraction::triplet_from_coeffs(snap.state, harmonic.theta, &harmonic.c, &harmonic.d);
        let hres = hres / std::f64::consts::SQRT_2;
        let rres = refined_minimum(snap.state, harmonic.theta)?;
        // the cross-product matrix resolves residuals only down to about sqrt(eps) ‖A‖
        self.push(outer, trip, "refined_residual_le_harmonic", rres, hres + 1e-10, hres > CROSS_PRODUCT_FLOOR * na);

        let qd = 2.0 * gamma.abs() * na * norm_st / (dist * sep);
        let same_sign = alpha.signum() == beta.signum() && alpha.signum() == (theta - tau).signum();
        let hyp36 = closest && qd < 1.0 && same_sign && den > 0.0;
        let (lo, hi) = if qd < 1.0 {
            (1.0 / (1.0 + qd), 1.0 / (1.0 - qd))
        } else {
            (f64::NAN, f64::NAN)
        };
        self.push(outer, trip, "delta_lower_bracket", lo, delta * (1.0 + 1e-10), hyp36);
        self.push(outer, trip, "delta_upper_bracket", delta, hi * (1.0 + 1e-10), hyp36);

        for (side, name_id, name_ratio, name_lo, name_hi) in [
            (&su, "expansion_identity_left", "expansion_ratio_left", "expansion_bracket_left_lower", "expansion_bracket_left_upper"),
            (&sv, "expansion_identity_right", "expansion_ratio_right", "expansion_bracket_right_lower", "expansion_bracket_right_upper"),
        ] {
            if let Some(x) = side {
                self.push(outer, trip, name_id, x.identity_residual, 1e-10, true);
                let ratio_ok = x.ratio.is_finite();
                self.push(outer, trip, name_ratio, if ratio_ok { x.ratio_residual } else { 0.0 }, 1e-10, ratio_ok);
                let hyp = ratio_ok && x.tau_side < 1.0;
                self.push(outer, trip, name_lo, 1.0 - x.tau_side, x.ratio + 1e-10, hyp);
                self.push(outer, trip, name_hi, x.ratio, 1.0 + x.tau_side + 1e-10, hyp);
            }
        }

        self.records.push(rec);
        Ok(())
    }
}

impl Observer for Verifier {
    fn on_inner_solve(&mut self, snap: &InnerSnapshot) {
        if let Err(e) = self.inspect(snap) {
            self.skipped.push((snap.outer, e.to_string()));
        }
    }
}

/// Result of an instrumented solve.
pub struct VerifyOutcome {
    pub solution: Solution,
    pub verifier: Verifier,
}

/// Runs the solver with a [`Verifier`] attached.
pub fn verify_run(a: &SparseMatrix, config: &SolverConfig) -> Result<VerifyOutcome> {
    let mut verifier = Verifier::new(a, config.tau)?;
    let solution = solve_observed(a, config, &mut verifier)?;
    Ok(VerifyOutcome { solution, verifier })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

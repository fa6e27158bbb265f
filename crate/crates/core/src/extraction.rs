//! Projected matrices and harmonic / refined harmonic extraction.
//!
//! With orthonormal bases `U`, `V` the state keeps `H = U^T A V`,
//! `G1 = (A^T U)^T (A^T U)` and `G2 = (A V)^T (A V)` together with the cached
//! products `A V` and `A^T U`, so restarts and purges never touch `A`.
//! Coefficient vectors are stacked as `f = [c; d]`, `c` acting on `U`.

use crate::dense::DenseMatrix;
use crate::eig::{sym_definite_gen_eig, sym_eig};
use crate::error::{JdsvdError, Result};
use crate::sparse::SparseMatrix;
use crate::vecops;

/// Splits below this norm are treated as degenerate.
pub const SPLIT_FLOOR: f64 = 1e-12;
const EXPANSION_ORTHO_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SearchState {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub av: DenseMatrix,
    pub atu: DenseMatrix,
    pub h: DenseMatrix,
    pub g1: DenseMatrix,
    pub g2: DenseMatrix,
}

impl SearchState {
    /// Empty state for an `nrows x ncols` matrix with room for `cap` directions.
    pub fn new(nrows: usize, ncols: usize, cap: usize) -> Self {
        SearchState {
            u: DenseMatrix::with_capacity(nrows, cap),
            v: DenseMatrix::with_capacity(ncols, cap),
            av: DenseMatrix::with_capacity(nrows, cap),
            atu: DenseMatrix::with_capacity(ncols, cap),
            h: DenseMatrix::zeros(0, 0),
            g1: DenseMatrix::zeros(0, 0),
            g2: DenseMatrix::zeros(0, 0),
        }
    }

    /// Current dimension `m` of each side.
    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Appends `u_plus` to `U` and `v_plus` to `V` using one product with `A` and
    /// one with `A^T`. Both vectors must be unit and orthogonal to the current bases.
    pub fn expand(&mut self, a: &SparseMatrix, u_plus: &[f64], v_plus: &[f64]) -> Result<()> {
        if u_plus.len() != a.nrows() || v_plus.len() != a.ncols() {
            return Err(JdsvdError::DimensionMismatch {
                expected: a.nrows() + a.ncols(),
                got: u_plus.len() + v_plus.len(),
            });
        }
        let ou = self.u.t_mul_vec(u_plus).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let ov = self.v.t_mul_vec(v_plus).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let nu = (vecops::norm2(u_plus) - 1.0).abs();
        let nv = (vecops::norm2(v_plus) - 1.0).abs();
        if ou > EXPANSION_ORTHO_TOL || ov > EXPANSION_ORTHO_TOL || nu > 1e-10 || nv > 1e-10 {
            return Err(JdsvdError::Precondition(format!(
                "expansion vectors not orthonormal to the bases (overlap {:.3e}, {:.3e})",
                ou.max(nu),
                ov.max(nv)
            )));
        }
        let mut av_new = vec![0.0; a.nrows()];
        a.apply_into(v_plus, &mut av_new);
        let mut atu_new = vec![0.0; a.ncols()];
        a.apply_transpose_into(u_plus, &mut atu_new);

        let m = self.dim();
        let mut h = DenseMatrix::zeros(m + 1, m + 1);
        let mut g1 = DenseMatrix::zeros(m + 1, m + 1);
        let mut g2 = DenseMatrix::zeros(m + 1, m + 1);
        for j in 0..m {
            for i in 0..m {
                h[(i, j)] = self.h[(i, j)];
                g1[(i, j)] = self.g1[(i, j)];
                g2[(i, j)] = self.g2[(i, j)];
            }
        }
        for i in 0..m {
            h[(i, m)] = vecops::dot(self.u.col(i), &av_new);
            h[(m, i)] = vecops::dot(u_plus, self.av.col(i));
            let x = vecops::dot(self.atu.col(i), &atu_new);
            g1[(i, m)] = x;
            g1[(m, i)] = x;
            let y = vecops::dot(self.av.col(i), &av_new);
            g2[(i, m)] = y;
            g2[(m, i)] = y;
        }
        h[(m, m)] = vecops::dot(u_plus, &av_new);
        g1[(m, m)] = vecops::dot(&atu_new, &atu_new);
        g2[(m, m)] = vecops::dot(&av_new, &av_new);

        self.u.push_col(u_plus);
        self.v.push_col(v_plus);
        self.av.push_col(&av_new);
        self.atu.push_col(&atu_new);
        self.h = h;
        self.g1 = g1;
        self.g2 = g2;
        Ok(())
    }

    /// Replaces `U` by `U C` and `V` by `V D` (both coefficient blocks orthonormal with
    /// the same column count) and updates every cached quantity without touching `A`.
    pub fn transform(&mut self, c: &DenseMatrix, d: &DenseMatrix) {
        assert_eq!(c.nrows(), self.dim());
        assert_eq!(d.nrows(), self.dim());
        assert_eq!(c.ncols(), d.ncols());
        self.u = self.u.matmul(c);
        self.v = self.v.matmul(d);
        self.av = self.av.matmul(d);
        self.atu = self.atu.matmul(c);
        self.h = c.t_matmul(&self.h.matmul(d));
        self.g1 = c.t_matmul(&self.g1.matmul(c));
        self.g1.symmetrize();
        self.g2 = d.t_matmul(&self.g2.matmul(d));
        self.g2.symmetrize();
    }

    /// Largest deviation of `(H, G1, G2)` from their definitions recomputed with `A`.
    pub fn consistency_error(&self, a: &SparseMatrix) -> (f64, f64, f64) {
        let m = self.dim();
        let av = DenseMatrix::from_cols(
            a.nrows(),
            &(0..m).map(|j| a.apply(self.v.col(j)).unwrap()).collect::<Vec<_>>(),
        );
        let atu = DenseMatrix::from_cols(
            a.ncols(),
            &(0..m)
                .map(|j| a.apply_transpose(self.u.col(j)).unwrap())
                .collect::<Vec<_>>(),
        );
        let diff = |x: &DenseMatrix, y: &DenseMatrix| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .fold(0.0_f64, |e, (p, q)| e.max((p - q).abs()))
        };
        (
            diff(&self.h, &self.u.t_matmul(&av)),
            diff(&self.g1, &atu.t_matmul(&atu)),
            diff(&self.g2, &av.t_matmul(&av)),
        )
    }
}

/// An extracted approximate triplet in coefficient form.
#[derive(Clone, Debug)]
pub struct ExtractionResult {
    /// `rho` for the harmonic extraction, `rho'` for the refined one.
    pub theta: f64,
    /// Unit coefficients of `u = U c`.
    pub c: Vec<f64>,
    /// Unit coefficients of `v = V d`, sign-fixed so that `c^T H d >= 0`.
    pub d: Vec<f64>,
    /// Every finite harmonic value `nu_i = 1 / mu_i` of the pencil.
    pub nu_list: Vec<f64>,
    /// Index into `nu_list` of the selected `nu`.
    pub selected: usize,
    /// Harmonic Rayleigh quotient `rho`, also kept in refined mode.
    pub harmonic_rho: f64,
    /// `nu + tau` of the selected pair (logged only).
    pub vartheta: f64,
}

/// `F = [[-tau I, H], [H^T, -tau I]]` and
/// `G = [[G1 + tau^2 I, -2 tau H], [-2 tau H^T, G2 + tau^2 I]]`.
pub fn assemble_fg(state: &SearchState, tau: f64) -> (DenseMatrix, DenseMatrix) {
    let m = state.dim();
    assert!(m >= 1, "assemble_fg on an empty state");
    let mut f = DenseMatrix::zeros(2 * m, 2 * m);
    let g = shifted_cross_product(state, tau);
    for i in 0..m {
        f[(i, i)] = -tau;
        f[(m + i, m + i)] = -tau;
        for j in 0..m {
            f[(i, m + j)] = state.h[(i, j)];
            f[(m + j, i)] = state.h[(i, j)];
        }
    }
    (f, g)
}

/// `[[G1 + s^2 I, -2 s H], [-2 s H^T, G2 + s^2 I]]`; `G` for `s = tau`, `G'` for `s = rho`.
pub fn shifted_cross_product(state: &SearchState, s: f64) -> DenseMatrix {
    let m = state.dim();
    let mut g = DenseMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for i in 0..m {
            g[(i, j)] = state.g1[(i, j)];
            g[(m + i, m + j)] = state.g2[(i, j)];
            g[(i, m + j)] = -2.0 * s * state.h[(i, j)];
            g[(m + j, i)] = -2.0 * s * state.h[(i, j)];
        }
        g[(j, j)] += s * s;
        g[(m + j, m + j)] += s * s;
    }
    g
}

/// Splits `f = [c; d]`, normalizes both halves and flips `d` when `c^T H d < 0`.
/// Returns `(c, d, c^T H d)` or `None` for a degenerate split.
pub fn split_and_fix(f: &[f64], h: &DenseMatrix) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let m = h.nrows();
    let mut c = f[..m].to_vec();
    let mut d = f[m..].to_vec();
    if vecops::normalize(&mut c) < SPLIT_FLOOR || vecops::normalize(&mut d) < SPLIT_FLOOR {
        return None;
    }
    let mut rq = vecops::dot(&c, &h.mul_vec(&d));
    if rq < 0.0 {
        vecops::scale(-1.0, &mut d);
        rq = -rq;
    }
    Some((c, d, rq))
}

/// Pencil eigenpairs of `(F, G)` in selection order: `|mu|` descending, and among
/// equal `|mu|` those with `nu + tau > 0` first, then by original position.
pub fn harmonic_pairs(state: &SearchState, tau: f64) -> Result<(Vec<f64>, DenseMatrix)> {
    let (f, g) = assemble_fg(state, tau);
    let pe = sym_definite_gen_eig(&f, &g)?;
    let n = pe.mu.len();
    let mut order: Vec<usize> = (0..n).collect();
    let positive = |i: usize| 1.0 / pe.mu[i] + tau > 0.0;
    // the eigensolver already sorts by |mu|; regroup near-ties only
    let mut start = 0;
    while start < n {
        let a0 = pe.mu[start].abs();
        let mut end = start + 1;
        while end < n && (pe.mu[end].abs() - a0).abs() <= 1e-12 * a0 {
            end += 1;
        }
        order[start..end].sort_by_key(|&i| (!positive(i), i));
        start = end;
    }
    let mu: Vec<f64> = order.iter().map(|&i| pe.mu[i]).collect();
    let mut vecs = DenseMatrix::with_capacity(f.nrows(), n);
    for &i in &order {
        vecs.push_col(pe.vectors.col(i));
    }
    Ok((mu, vecs))
}

/// Harmonic extraction: the pencil eigenpair with largest `|1/nu|` whose split is
/// nondegenerate, normalized and sign-fixed, with `theta = rho = c^T H d`.
pub fn harmonic_extract(state: &SearchState, tau: f64) -> Result<ExtractionResult> {
    let (mu, vecs) = harmonic_pairs(state, tau)?;
    let nu_list: Vec<f64> = mu.iter().map(|&x| 1.0 / x).collect();
    for j in 0..mu.len() {
        if !nu_list[j].is_finite() {
            continue;
        }
        if let Some((c, d, rho)) = split_and_fix(vecs.col(j), &state.h) {
            return Ok(ExtractionResult {
                theta: rho,
                c,
                d,
                selected: j,
                harmonic_rho: rho,
                vartheta: nu_list[j] + tau,
                nu_list,
            });
        }
    }
    Err(JdsvdError::DegenerateExtraction)
}

/// Refined step for a given shift: the eigenvector of the smallest eigenvalue of
/// `G'(rho)` whose split is nondegenerate. Returns `(c, d, rho', lambda_min)`.
pub fn refine(state: &SearchState, rho: f64) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let gp = shifted_cross_product(state, rho);
    let eig = sym_eig(&gp)?;
    for j in 0..eig.values.len() {
        if let Some((c, d, rq)) = split_and_fix(eig.vectors.col(j), &state.h) {
            return Ok((c, d, rq, eig.values[j]));
        }
    }
    Err(JdsvdError::DegenerateExtraction)
}

/// Refined harmonic extraction around the harmonic result `harmonic`.
pub fn refined_harmonic_extract(
    state: &SearchState,
    harmonic: &ExtractionResult,
) -> Result<ExtractionResult> {
    let (c, d, rho_prime, _) = refine(state, harmonic.harmonic_rho)?;
    Ok(ExtractionResult {
        theta: rho_prime,
        c,
        d,
        ..harmonic.clone()
    })
}

/// Up to `keep` coefficient pairs for a thick restart, best first. Refined mode
/// refines each harmonic pair at its own Rayleigh quotient.
pub fn restart_candidates(
    state: &SearchState,
    tau: f64,
    keep: usize,
    refined: bool,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (mu, vecs) = harmonic_pairs(state, tau)?;
    let mut out = Vec::with_capacity(keep);
    for j in 0..mu.len() {
        if out.len() == keep {
            break;
        }
        if !(1.0 / mu[j]).is_finite() {
            continue;
        }
        if let Some((c, d, rho)) = split_and_fix(vecs.col(j), &state.h) {
            if refined {
                let (rc, rd, _, _) = refine(state, rho)?;
                out.push((rc, rd));
            } else {
                out.push((c, d));
            }
        }
    }
    Ok(out)
}

/// `r = [A v - theta u; A^T u - theta v]` with fresh products, and `‖r‖`.
pub fn residual(a: &SparseMatrix, theta: f64, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let av = a.apply(v)?;
    let atu = a.apply_transpose(u)?;
    Ok(stack_residual(av, atu, theta, u, v))
}

/// Residual from given `A v` and `A^T u`.
pub fn stack_residual(
    mut av: Vec<f64>,
    mut atu: Vec<f64>,
    theta: f64,
    u: &[f64],
    v: &[f64],
) -> (Vec<f64>, f64) {
    vecops::axpy(-theta, u, &mut av);
    vecops::axpy(-theta, v, &mut atu);
    av.extend_from_slice(&atu);
    let n = vecops::norm2(&av);
    (av, n)
}

/// `(u, v, r, ‖r‖)` for coefficients `(c, d)` from the cached blocks.
pub fn triplet_from_coeffs(
    state: &SearchState,
    theta: f64,
    c: &[f64],
    d: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let u = state.u.mul_vec(c);
    let v = state.v.mul_vec(d);
    let av = state.av.mul_vec(d);
    let atu = state.atu.mul_vec(c);
    let (r, n) = stack_residual(av, atu, theta, &u, &v);
    (u, v, r, n)
}

//! Correction equation: the doubly projected shifted augmented operator, the
//! adaptive inner tolerance, and MINRES.
//!
//! Vectors of length `M + N` are stacked `[s; t]` with `s` on the left side.

use crate::dense::DenseMatrix;
use crate::error::{JdsvdError, Result};
use crate::sparse::{project_out, SparseMatrix};
use crate::vecops;

/// Cap on the inner tolerance.
pub const ETA_CAP: f64 = 0.01;
/// Tolerance used when the correction equation is solved "exactly" by iteration.
pub const ETA_EXACT: f64 = 1e-14;
const TRUE_RESIDUAL_EVERY: usize = 20;
/// True residual this far above the recurrence estimate ends a cycle.
const DRIFT_FACTOR: f64 = 10.0;
const DENOM_FLOOR: f64 = 1e-14;

/// `Pi K Pi` with `K = [[-tau I, A], [A^T, -tau I]]` and
/// `Pi = blockdiag(I - Q Q^T, I - Z Z^T)`; `Q`, `Z` orthonormal with equal widths.
#[derive(Clone, Debug)]
pub struct ProjectedOperator<'a> {
    a: &'a SparseMatrix,
    tau: f64,
    q: DenseMatrix,
    z: DenseMatrix,
}

impl<'a> ProjectedOperator<'a> {
    pub fn new(a: &'a SparseMatrix, tau: f64, q: DenseMatrix, z: DenseMatrix) -> Result<Self> {
        if q.nrows() != a.nrows() || z.nrows() != a.ncols() {
            return Err(JdsvdError::DimensionMismatch {
                expected: a.nrows() + a.ncols(),
                got: q.nrows() + z.nrows(),
            });
        }
        if q.ncols() != z.ncols() {
            return Err(JdsvdError::Precondition(format!(
                "projector widths differ: {} vs {}",
                q.ncols(),
                z.ncols()
            )));
        }
        Ok(ProjectedOperator { a, tau, q, z })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows() + self.a.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    /// Applies `Pi` in place.
    pub fn project(&self, x: &mut [f64]) {
        let m = self.a.nrows();
        let (s, t) = x.split_at_mut(m);
        project_out(s, &[&self.q]);
        project_out(t, &[&self.z]);
    }

    /// `Pi K Pi x`, two sparse products.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let m = self.a.nrows();
        let mut px = x.to_vec();
        self.project(&mut px);
        let (s, t) = px.split_at(m);
        let mut y = vec![0.0; self.dim()];
        {
            let (top, bot) = y.split_at_mut(m);
            self.a.apply_into(t, top);
            self.a.apply_transpose_into(s, bot);
        }
        vecops::axpy(-self.tau, &px, &mut y);
        self.project(&mut y);
        y
    }

    /// Dense `(M+N) x (M+N)` matrix of the operator, for desk-scale checks.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut e = vec![0.0; n];
        let mut out = DenseMatrix::with_capacity(n, n);
        for j in 0..n {
            e[j] = 1.0;
            out.push_col(&self.apply(&e));
            e[j] = 0.0;
        }
        out.symmetrize();
        out
    }
}

/// A user-supplied symmetric positive definite preconditioner. It is applied as
/// `Pi M^{-1} Pi` so the Krylov space stays in the double-orthogonal complement.
pub trait Preconditioner {
    /// `M^{-1} x`
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

/// Adaptive inner tolerance. Returns `(eta, c)` with `eta = min(c * eps_tilde, 0.01)`.
///
/// `c = 2 sqrt(2) max |nu_i| / |nu_i + tau - theta|` over the finite `nu_i` other than
/// the selected one with `nu_i + tau > 0`; `c = 1` when `m = 1`, when no `nu_i`
/// qualifies, or when a denominator falls below 1e-14.
pub fn inner_tolerance(
    nu_list: &[f64],
    selected: usize,
    tau: f64,
    theta: f64,
    m: usize,
    eps_tilde: f64,
) -> (f64, f64) {
    debug_assert!(eps_tilde > 0.0);
    let c = if m <= 1 {
        1.0
    } else {
        let mut best: Option<f64> = None;
        let mut tiny = false;
        for (i, &nu) in nu_list.iter().enumerate() {
            if i == selected || !nu.is_finite() || nu + tau <= 0.0 {
                continue;
            }
            let den = (nu + tau - theta).abs();
            if den < DENOM_FLOOR {
                tiny = true;
                break;
            }
            let x = nu.abs() / den;
            best = Some(best.map_or(x, |b: f64| b.max(x)));
        }
        match best {
            Some(x) if !tiny => 2.0 * std::f64::consts::SQRT_2 * x,
            _ => 1.0,
        }
    };
    ((c * eps_tilde).min(ETA_CAP), c)
}

#[derive(Clone, Debug)]
pub struct InnerSolveReport {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// `‖rhs - Op [s; t]‖ / ‖rhs‖` from a true residual.
    pub r_in: f64,
    pub iterations: usize,
    pub eta: f64,
    pub hit_cap: bool,
    /// A restart cycle failed to halve the true residual before reaching `eta`.
    pub stagnated: bool,
    /// Relative residual estimate after each iteration.
    pub residual_history: Vec<f64>,
}

/// MINRES from the zero vector on `Op x = rhs`, stopping on a true relative residual
/// `<= eta` or after `max_inner` iterations. When the recurrence estimate reaches
/// `eta` but the true residual does not, a new cycle is started from the current
/// iterate; a cycle that fails to halve the true residual ends the solve.
pub fn minres_solve(
    op: &ProjectedOperator,
    rhs: &[f64],
    eta: f64,
    max_inner: usize,
) -> Result<InnerSolveReport> {
    minres_solve_preconditioned(op, rhs, eta, max_inner, None)
}

pub fn minres_solve_preconditioned(
    op: &ProjectedOperator,
    rhs: &[f64],
    eta: f64,
    max_inner: usize,
    precond: Option<&dyn Preconditioner>,
) -> Result<InnerSolveReport> {
    let n = op.dim();
    let m = op.nrows();
    if rhs.len() != n {
        return Err(JdsvdError::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if !vecops::all_finite(rhs) {
        return Err(JdsvdError::NumericFailure("non-finite right-hand side".into()));
    }
    let bnorm = vecops::norm2(rhs);
    let finish = |x: Vec<f64>, r_in, iterations, hit_cap, stagnated, hist| {
        let (s, t) = x.split_at(m);
        InnerSolveReport {
            s: s.to_vec(),
            t: t.to_vec(),
            r_in,
            iterations,
            eta,
            hit_cap,
            stagnated,
            residual_history: hist,
        }
    };
    if bnorm == 0.0 {
        return Ok(finish(vec![0.0; n], 0.0, 0, false, false, Vec::new()));
    }

    let apply_m = |r: &[f64]| -> Vec<f64> {
        match precond {
            None => r.to_vec(),
            Some(p) => {
                let mut y = r.to_vec();
                op.project(&mut y);
                let mut y = p.apply(&y);
                op.project(&mut y);
                y
            }
        }
    };
    let true_rel = |x: &[f64]| -> (Vec<f64>, f64) {
        let mut r = rhs.to_vec();
        vecops::axpy(-1.0, &op.apply(x), &mut r);
        let nr = vecops::norm2(&r);
        (r, nr / bnorm)
    };

    let mut x = vec![0.0; n];
    let mut hist = Vec::new();
    let mut its = 0usize;
    let mut cycle_rhs = rhs.to_vec();
    let mut cycle_rel = 1.0;
    let mut last_rel = 1.0;
    // best iterate by true residual; rounding can make later iterates drift away
    let mut best: Option<(Vec<f64>, f64)> = None;
    let keep_best = |best: &mut Option<(Vec<f64>, f64)>, x: &[f64], rel: f64| {
        if best.as_ref().is_none_or(|b| rel < b.1) {
            *best = Some((x.to_vec(), rel));
        }
    };

    loop {
        // one MINRES cycle on Op dx = cycle_rhs, accumulating into x
        let cycle_norm = vecops::norm2(&cycle_rhs);
        let mut r1 = cycle_rhs.clone();
        let mut r2 = cycle_rhs.clone();
        let mut y = apply_m(&r1);
        let beta1_sq = vecops::dot(&r1, &y);
        if !(beta1_sq > 0.0) {
            if beta1_sq.is_nan() {
                return Err(JdsvdError::NumericFailure("NaN in MINRES start".into()));
            }
            // preconditioned start vanished; nothing more to gain
            break;
        }
        let beta1 = beta1_sq.sqrt();
        let (mut oldb, mut beta) = (0.0, beta1);
        let (mut dbar, mut epsln) = (0.0_f64, 0.0_f64);
        let mut phibar = beta1;
        let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
        let mut w = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut cycle_its = 0usize;
        let mut estimate_reached = false;

        while its < max_inner {
            its += 1;
            cycle_its += 1;
            let v: Vec<f64> = y.iter().map(|e| e / beta).collect();
            y = op.apply(&v);
            if cycle_its >= 2 {
                vecops::axpy(-beta / oldb, &r1, &mut y);
            }
            let alfa = vecops::dot(&v, &y);
            vecops::axpy(-alfa / beta, &r2, &mut y);
            r1 = std::mem::replace(&mut r2, y);
            y = apply_m(&r2);
            oldb = beta;
            let bsq = vecops::dot(&r2, &y);
            if bsq.is_nan() || !alfa.is_finite() {
                return Err(JdsvdError::NumericFailure(format!(
                    "non-finite Lanczos coefficient at inner iteration {its}"
                )));
            }
            beta = bsq.max(0.0).sqrt();

            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;

            let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
            w = v
                .iter()
                .zip(&w1)
                .zip(&w2)
                .map(|((vi, w1i), w2i)| (vi - oldeps * w1i - delta * w2i) / gamma)
                .collect();
            vecops::axpy(phi, &w, &mut x);

            let est = (phibar / beta1) * cycle_norm / bnorm;
            hist.push(est);
            if !est.is_finite() {
                return Err(JdsvdError::NumericFailure(format!(
                    "non-finite residual estimate at inner iteration {its}"
                )));
            }
            if est <= eta {
                estimate_reached = true;
                break;
            }
            // Lanczos breakdown: the Krylov space is invariant
            if beta <= f64::EPSILON * beta1 {
                estimate_reached = true;
                break;
            }
            if its % TRUE_RESIDUAL_EVERY == 0 {
                let mut xp = x.clone();
                op.project(&mut xp);
                let (_, rel) = true_rel(&xp);
                if !rel.is_finite() {
                    return Err(JdsvdError::NumericFailure("non-finite inner iterate".into()));
                }
                keep_best(&mut best, &xp, rel);
                if rel <= eta {
                    break;
                }
                // the recurrence no longer tracks the true residual; restart from it
                if rel > DRIFT_FACTOR * est.max(eta) {
                    estimate_reached = true;
                    break;
                }
            }
        }

        op.project(&mut x);
        let (r, rel) = true_rel(&x);
        if !rel.is_finite() {
            return Err(JdsvdError::NumericFailure("non-finite inner iterate".into()));
        }
        last_rel = rel;
        keep_best(&mut best, &x, rel);
        if rel <= eta {
            return Ok(finish(x, rel, its, false, false, hist));
        }
        let (bx, brel) = best.take().expect("best iterate recorded");
        if its >= max_inner {
            return Ok(finish(bx, brel, its, true, false, hist));
        }
        if !estimate_reached || rel > 0.5 * cycle_rel {
            return Ok(finish(bx, brel, its, false, true, hist));
        }
        best = Some((bx, brel));
        cycle_rel = rel;
        cycle_rhs = r;
        op.project(&mut cycle_rhs);
    }
    op.project(&mut x);
    match best {
        Some((bx, brel)) if brel < last_rel => Ok(finish(bx, brel, its, its >= max_inner, true, hist)),
        _ => Ok(finish(x, last_rel, its, its >= max_inner, true, hist)),
    }
}

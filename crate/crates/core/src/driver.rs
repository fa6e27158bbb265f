//! Outer iteration: extraction, convergence test, correction equation, expansion,
//! thick restart and deflation of converged triplets.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correction::{inner_tolerance, minres_solve, InnerSolveReport, ProjectedOperator, ETA_EXACT};
use crate::dense::DenseMatrix;
use crate::error::{JdsvdError, Result};
use crate::extraction::{
    harmonic_extract, refined_harmonic_extract, residual, restart_candidates, ExtractionResult,
    SearchState,
};
use crate::sparse::{orthonormalize_against, orthonormalize_against_all, project_out, SparseMatrix};
use crate::vecops;

/// Consecutive degenerate extractions tolerated before giving up.
const MAX_DEGENERATE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Harmonic,
    RefinedHarmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMode {
    /// `eta` from the adaptive rule.
    Inexact,
    /// `eta = 1e-14` regardless of the subspace.
    IterExact,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tau: f64,
    pub num: usize,
    pub variant: Variant,
    pub eps_tilde: f64,
    pub tol: f64,
    /// Per-side subspace dimension that triggers a thick restart.
    pub max_dim: usize,
    pub restart_keep: usize,
    pub inner_mode: InnerMode,
    /// `None` means `2 (M + N)`.
    pub max_inner: Option<usize>,
    pub max_outer: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(tau: f64, num: usize) -> Self {
        SolverConfig {
            tau,
            num,
            variant: Variant::Harmonic,
            eps_tilde: 1e-3,
            tol: 1e-10,
            max_dim: 20,
            restart_keep: 3,
            inner_mode: InnerMode::Inexact,
            max_inner: None,
            max_outer: 3000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(JdsvdError::InvalidConfig(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive and finite, got {}", self.tau));
        }
        if self.num == 0 {
            return bad("number of triplets must be at least 1".into());
        }
        if !(self.eps_tilde > 0.0 && self.eps_tilde < 1.0) {
            return bad(format!("eps_tilde must lie in (0, 1), got {}", self.eps_tilde));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.restart_keep == 0 || self.restart_keep >= self.max_dim {
            return bad(format!(
                "need 1 <= restart_keep < max_dim, got {} and {}",
                self.restart_keep, self.max_dim
            ));
        }
        if self.max_inner == Some(0) || self.max_outer == 0 {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ApproxTriplet {
    pub theta: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub resnorm: f64,
}

/// Converged values with their orthonormal left and right vectors.
#[derive(Clone, Debug)]
pub struct DeflationSet {
    pub theta: Vec<f64>,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl DeflationSet {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        DeflationSet {
            theta: Vec::new(),
            u: DenseMatrix::zeros(nrows, 0),
            v: DenseMatrix::zeros(ncols, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRecord {
    pub outer: usize,
    /// 1-based index of the triplet being sought.
    pub triplet: usize,
    pub m: usize,
    pub theta: f64,
    pub resnorm: f64,
    pub inner_iters: usize,
    pub eta: f64,
    pub r_in: f64,
    pub hit_cap: bool,
    pub secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub records: Vec<HistoryRecord>,
}

impl ConvergenceHistory {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }

    pub fn capped_solves(&self) -> usize {
        self.records.iter().filter(|r| r.hit_cap).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxOuterReached,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Sorted by `|theta - tau|` ascending.
    pub triplets: Vec<ApproxTriplet>,
    /// In order of convergence.
    pub deflation: DeflationSet,
    pub history: ConvergenceHistory,
    pub status: SolveStatus,
    pub one_norm: f64,
    pub random_expansions: usize,
    /// Unusual events: random substitutes, reinitializations, stagnated inner solves.
    pub events: Vec<String>,
}

impl Solution {
    pub fn outer_iterations(&self) -> usize {
        self.history.outer_iterations()
    }

    pub fn inner_iterations(&self) -> usize {
        self.history.inner_iterations()
    }
}

/// State visible to an [`Observer`] right after an inner solve, before expansion.
pub struct InnerSnapshot<'s> {
    pub outer: usize,
    pub tau: f64,
    pub state: &'s SearchState,
    pub deflation: &'s DeflationSet,
    pub extraction: &'s ExtractionResult,
    pub u: &'s [f64],
    pub v: &'s [f64],
    pub rhs: &'s [f64],
    pub report: &'s InnerSolveReport,
}

/// Instrumentation hooks; every method defaults to doing nothing.
pub trait Observer {
    fn on_inner_solve(&mut self, _snap: &InnerSnapshot) {}
    fn on_converged(&mut self, _triplet: &ApproxTriplet, _deflation: &DeflationSet) {}
    fn on_expand(&mut self, _state: &SearchState, _deflation: &DeflationSet) {}
}

pub struct NoObserver;
impl Observer for NoObserver {}

/// `r_p = blockdiag(I - U_c U_c^T, I - V_c V_c^T) r`.
pub fn projected_residual(r: &[f64], uc: &DenseMatrix, vc: &DenseMatrix) -> Vec<f64> {
    let m = uc.nrows();
    let mut rp = r.to_vec();
    let (s, t) = rp.split_at_mut(m);
    project_out(s, &[uc]);
    project_out(t, &[vc]);
    rp
}

/// Orthonormal `m x (m-1)` completion of the unit vector `c` (Householder).
pub fn orthonormal_complement(c: &[f64]) -> DenseMatrix {
    let m = c.len();
    // reflector mapping c to -sign(c_0) e_0; its other columns span c-perp
    let mut w = c.to_vec();
    let s = if c[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += s * vecops::norm2(c);
    let wn2 = vecops::dot(&w, &w);
    let mut out = DenseMatrix::with_capacity(m, m - 1);
    for j in 1..m {
        let mut col = vec![0.0; m];
        col[j] = 1.0;
        let f = 2.0 * w[j] / wn2;
        vecops::axpy(-f, &w, &mut col);
        out.push_col(&col);
    }
    out
}

/// Replaces `(U, V)` by `(U C, V D)` with `C`, `D` completing `c`, `d`; dimension drops by one.
pub fn purge_converged(state: &mut SearchState, c: &[f64], d: &[f64]) {
    let cc = orthonormal_complement(c);
    let dd = orthonormal_complement(d);
    state.transform(&cc, &dd);
}

/// Orthonormalizes coefficient pairs and restricts the state to their span. Pairs
/// whose left or right side is numerically dependent on earlier ones are dropped.
/// Returns the retained count.
pub fn thick_restart(state: &mut SearchState, pairs: &[(Vec<f64>, Vec<f64>)]) -> usize {
    let m = state.dim();
    let mut cb = DenseMatrix::with_capacity(m, pairs.len());
    let mut db = DenseMatrix::with_capacity(m, pairs.len());
    for (c, d) in pairs {
        let oc = orthonormalize_against(c, &cb).into_vector();
        let od = orthonormalize_against(d, &db).into_vector();
        if let (Some(oc), Some(od)) = (oc, od) {
            cb.push_col(&oc);
            db.push_col(&od);
        }
    }
    if cb.ncols() > 0 {
        state.transform(&cb, &db);
    }
    cb.ncols()
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, blocks: &[&DenseMatrix]) -> Option<Vec<f64>> {
    for _ in 0..10 {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(x) = orthonormalize_against_all(&x, blocks).into_vector() {
            return Some(x);
        }
    }
    None
}

fn hstack(a: &DenseMatrix, x: &[f64]) -> DenseMatrix {
    let mut out = DenseMatrix::with_capacity(a.nrows(), a.ncols() + 1);
    for c in a.cols() {
        out.push_col(c);
    }
    out.push_col(x);
    out
}

struct Run<'a> {
    a: &'a SparseMatrix,
    cfg: &'a SolverConfig,
    rng: ChaCha8Rng,
    events: Vec<String>,
    random_expansions: usize,
}

impl Run<'_> {
    /// Unit vector from `seed` orthogonal to `blocks`, or a random one on rejection.
    fn side_vector(&mut self, seed: &[f64], blocks: &[&DenseMatrix], what: &str) -> Result<Vec<f64>> {
        if let Some(x) = orthonormalize_against_all(seed, blocks).into_vector() {
            return Ok(x);
        }
        self.random_expansions += 1;
        self.events.push(format!("{what}: rejected, substituted a random direction"));
        random_unit(&mut self.rng, seed.len(), blocks)
            .ok_or_else(|| JdsvdError::NumericFailure(format!("{what}: no admissible direction left")))
    }

    /// Fresh one-dimensional state from constant vectors orthogonalized against the deflation set.
    fn init_state(&mut self, defl: &DeflationSet, cap: usize) -> Result<SearchState> {
        let (mm, nn) = (self.a.nrows(), self.a.ncols());
        let u0 = vec![1.0 / (mm as f64).sqrt(); mm];
        let v0 = vec![1.0 / (nn as f64).sqrt(); nn];
        let u = self.side_vector(&u0, &[&defl.u], "initial left vector")?;
        let v = self.side_vector(&v0, &[&defl.v], "initial right vector")?;
        let mut st = SearchState::new(mm, nn, cap + 1);
        st.expand(self.a, &u, &v)?;
        Ok(st)
    }

    fn random_state(&mut self, defl: &DeflationSet, cap: usize) -> Result<SearchState> {
        let (mm, nn) = (self.a.nrows(), self.a.ncols());
        let u = random_unit(&mut self.rng, mm, &[&defl.u])
            .ok_or_else(|| JdsvdError::NumericFailure("no admissible left direction".into()))?;
        let v = random_unit(&mut self.rng, nn, &[&defl.v])
            .ok_or_else(|| JdsvdError::NumericFailure("no admissible right direction".into()))?;
        let mut st = SearchState::new(mm, nn, cap + 1);
        st.expand(self.a, &u, &v)?;
        Ok(st)
    }

    fn extract(&self, st: &SearchState) -> Result<ExtractionResult> {
        let h = harmonic_extract(st, self.cfg.tau)?;
        match self.cfg.variant {
            Variant::Harmonic => Ok(h),
            Variant::RefinedHarmonic => refined_harmonic_extract(st, &h),
        }
    }
}

/// Computes `config.num` singular triplets of `a` closest to `config.tau`.
pub fn solve(a: &SparseMatrix, config: &SolverConfig) -> Result<Solution> {
    solve_observed(a, config, &mut NoObserver)
}

pub fn solve_observed(
    a: &SparseMatrix,
    config: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<Solution> {
    config.validate()?;
    let (mm, nn) = (a.nrows(), a.ncols());
    if config.num > mm.min(nn) {
        return Err(JdsvdError::InvalidConfig(format!(
            "cannot compute {} triplets of a {mm}x{nn} matrix",
            config.num
        )));
    }
    let start = Instant::now();
    let one_norm = a.one_norm();
    let threshold = one_norm * config.tol;
    let max_inner = config.max_inner.unwrap_or(2 * (mm + nn));
    let tau = config.tau;

    let mut run = Run {
        a,
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        events: Vec::new(),
        random_expansions: 0,
    };
    let mut defl = DeflationSet::new(mm, nn);
    let mut history = ConvergenceHistory::default();
    let mut state = run.init_state(&defl, config.max_dim)?;
    let mut converged = Vec::new();
    let mut degenerate = 0usize;
    let mut status = SolveStatus::Converged;

    while defl.len() < config.num {
        if history.outer_iterations() >= config.max_outer {
            status = SolveStatus::MaxOuterReached;
            break;
        }
        let outer = history.outer_iterations() + 1;
        let k = defl.len();

        let ext = match run.extract(&state) {
            Ok(e) => {
                degenerate = 0;
                e
            }
            Err(JdsvdError::DegenerateExtraction) | Err(JdsvdError::DegeneratePencil) => {
                degenerate += 1;
                if degenerate > MAX_DEGENERATE {
                    return Err(JdsvdError::DegenerateExtraction);
                }
                run.events
                    .push(format!("outer {outer}: degenerate extraction, random reinitialization"));
                state = run.random_state(&defl, config.max_dim)?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let m = state.dim();
        let u = state.u.mul_vec(&ext.c);
        let v = state.v.mul_vec(&ext.d);
        let (r, resnorm) = residual(a, ext.theta, &u, &v)?;
        if !resnorm.is_finite() {
            return Err(JdsvdError::NumericFailure(format!("non-finite residual at outer {outer}")));
        }

        let mut record = HistoryRecord {
            outer,
            triplet: k + 1,
            m,
            theta: ext.theta,
            resnorm,
            inner_iters: 0,
            eta: 0.0,
            r_in: 0.0,
            hit_cap: false,
            secs: 0.0,
        };

        if resnorm <= threshold {
            record.secs = start.elapsed().as_secs_f64();
            history.records.push(record);
            let trip = ApproxTriplet {
                theta: ext.theta,
                u: u.clone(),
                v: v.clone(),
                r,
                resnorm,
            };
            defl.theta.push(ext.theta);
            defl.u.push_col(&u);
            defl.v.push_col(&v);
            observer.on_converged(&trip, &defl);
            converged.push(trip);
            if defl.len() == config.num {
                break;
            }
            if m > 1 {
                purge_converged(&mut state, &ext.c, &ext.d);
            } else {
                state = run.init_state(&defl, config.max_dim)?;
            }
            continue;
        }

        let mut rhs = projected_residual(&r, &defl.u, &defl.v);
        vecops::scale(-1.0, &mut rhs);
        let eta = match config.inner_mode {
            InnerMode::IterExact => ETA_EXACT,
            InnerMode::Inexact => {
                inner_tolerance(&ext.nu_list, ext.selected, tau, ext.theta, m, config.eps_tilde).0
            }
        };
        let op = ProjectedOperator::new(a, tau, hstack(&defl.u, &u), hstack(&defl.v, &v))?;
        op.project(&mut rhs);
        let report = minres_solve(&op, &rhs, eta, max_inner)?;
        if report.stagnated {
            run.events.push(format!(
                "outer {outer}: inner solve stagnated at r_in = {:.3e} (eta = {eta:.1e})",
                report.r_in
            ));
        }
        observer.on_inner_solve(&InnerSnapshot {
            outer,
            tau,
            state: &state,
            deflation: &defl,
            extraction: &ext,
            u: &u,
            v: &v,
            rhs: &rhs,
            report: &report,
        });
        record.inner_iters = report.iterations;
        record.eta = eta;
        record.r_in = report.r_in;
        record.hit_cap = report.hit_cap;
        record.secs = start.elapsed().as_secs_f64();
        history.records.push(record);

        // keep room for one more direction on each side
        let cap = config.max_dim.min(mm.min(nn) - k);
        let (mut s_seed, mut t_seed) = (report.s, report.t);
        if m >= cap {
            let keep = config.restart_keep.min(cap - 1);
            if keep == 0 {
                // nothing can be kept; continue from the corrected vectors alone
                vecops::axpy(1.0, &u, &mut s_seed);
                vecops::axpy(1.0, &v, &mut t_seed);
                state = SearchState::new(mm, nn, config.max_dim + 1);
            } else {
                let mut pairs = restart_candidates(
                    &state,
                    tau,
                    keep,
                    config.variant == Variant::RefinedHarmonic,
                )?;
                if pairs.is_empty() {
                    pairs.push((ext.c.clone(), ext.d.clone()));
                }
                thick_restart(&mut state, &pairs);
            }
        }
        let un = run.side_vector(&s_seed, &[&defl.u, &state.u], "left expansion")?;
        let vn = run.side_vector(&t_seed, &[&defl.v, &state.v], "right expansion")?;
        state.expand(a, &un, &vn)?;
        observer.on_expand(&state, &defl);
    }

    let mut triplets = Vec::with_capacity(converged.len());
    for t in converged {
        // final residual from scratch
        let (r, resnorm) = residual(a, t.theta, &t.u, &t.v)?;
        triplets.push(ApproxTriplet { r, resnorm, ..t });
    }
    triplets.sort_by(|x, y| (x.theta - tau).abs().total_cmp(&(y.theta - tau).abs()));
    Ok(Solution {
        triplets,
        deflation: defl,
        history,
        status,
        one_norm,
        random_expansions: run.random_expansions,
        events: run.events,
    })
}

use jdsvd::diagnostics::verify_run;
use jdsvd::driver::{
    solve, solve_observed, ApproxTriplet, DeflationSet, InnerSnapshot, Observer, SolveStatus, SolverConfig, Variant,
};
use jdsvd::eig::dense_svd;
use jdsvd::extraction::SearchState;
use jdsvd::history::{read_history_csv, read_results_csv, write_history_csv, write_results_csv};
use jdsvd::synthetic::{acceptance_suite, closest_to, log_spaced_problem};
use jdsvd::{load_matrix_market, vecops, write_matrix_market, DenseMatrix, SparseMatrix};

fn diag3() -> SparseMatrix {
    SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap()
}

fn sin_to_basis(x: &[f64], basis: &DenseMatrix) -> f64 {
    let mut y = x.to_vec();
    for _ in 0..2 {
        for c in basis.cols() {
            let h = vecops::dot(c, &y);
            vecops::axpy(-h, c, &mut y);
        }
    }
    vecops::norm2(&y) / vecops::norm2(x)
}

#[test]
fn diagonal_ground_truth_both_variants() {
    for variant in [Variant::Harmonic, Variant::RefinedHarmonic] {
        let a = diag3();
        let cfg = SolverConfig {
            variant,
            ..SolverConfig::new(1.9, 1)
        };
        let sol = solve(&a, &cfg).unwrap();
        let t = &sol.triplets[0];
        assert!((t.theta - 2.0).abs() <= 1e-10 * a.one_norm());
        assert!((t.u[1].abs() - 1.0).abs() < 1e-10 && (t.v[1].abs() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn log_spaced_problem_matches_oracle() {
    let p = log_spaced_problem(300, 200, 31).unwrap();
    let svd = dense_svd(&p.a.to_dense()).unwrap();
    let want = closest_to(&svd.sigma, p.tau, 1)[0];
    for variant in [Variant::Harmonic, Variant::RefinedHarmonic] {
        let cfg = SolverConfig {
            variant,
            ..SolverConfig::new(p.tau, 1)
        };
        let sol = solve(&p.a, &cfg).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.triplets[0].theta - want).abs() <= 1e-8 * want);
    }
}

#[test]
fn returned_triplets_meet_stopping_rule_and_invariants() {
    let p = &acceptance_suite(5).unwrap()[6];
    let cfg = SolverConfig::new(p.tau, 4);
    let sol = solve(&p.a, &cfg).unwrap();
    let want = p.closest(4);
    assert_eq!(sol.triplets.len(), 4);
    for (t, w) in sol.triplets.iter().zip(&want) {
        assert!((t.theta - w).abs() <= 1e-8 * w);
        assert!(t.theta >= 0.0);
        assert!((vecops::norm2(&t.u) - 1.0).abs() < 1e-12);
        assert!((vecops::norm2(&t.v) - 1.0).abs() < 1e-12);
        let mut top = p.a.apply(&t.v).unwrap();
        vecops::axpy(-t.theta, &t.u, &mut top);
        let mut bot = p.a.apply_transpose(&t.u).unwrap();
        vecops::axpy(-t.theta, &t.v, &mut bot);
        let res = (vecops::dot(&top, &top) + vecops::dot(&bot, &bot)).sqrt();
        assert!(res <= p.a.one_norm() * cfg.tol);
        assert!(vecops::dot(&top, &t.u).abs() <= 1e-12 * p.a.one_norm());
    }
    // nearest first
    assert!(sol
        .triplets
        .windows(2)
        .all(|w| (w[0].theta - p.tau).abs() <= (w[1].theta - p.tau).abs()));
}

/// Tracks subspace quality against the oracle vector and deflation orthogonality.
struct Quality {
    targets: Vec<(Vec<f64>, Vec<f64>)>,
    before: Option<(usize, usize, f64, f64)>,
    worst_increase: f64,
    worst_defl_overlap: f64,
    expansions: usize,
    converged: Vec<f64>,
    redetected: usize,
    tol_abs: f64,
}

impl Quality {
    fn target(&self, k: usize) -> &(Vec<f64>, Vec<f64>) {
        &self.targets[k]
    }
}

impl Observer for Quality {
    fn on_inner_solve(&mut self, snap: &InnerSnapshot) {
        let k = snap.deflation.len();
        let (us, vs) = self.target(k).clone();
        self.before = Some((
            k,
            snap.state.dim(),
            sin_to_basis(&us, &snap.state.u),
            sin_to_basis(&vs, &snap.state.v),
        ));
        for th in &snap.deflation.theta {
            if (snap.extraction.theta - th).abs() <= self.tol_abs && snap.state.dim() > 1 {
                self.redetected += 1;
            }
        }
    }

    fn on_expand(&mut self, state: &SearchState, defl: &DeflationSet) {
        let k = defl.len();
        if let Some((k0, m0, su, sv)) = self.before.take() {
            if k0 == k && state.dim() == m0 + 1 {
                let (us, vs) = self.target(k);
                let d1 = sin_to_basis(us, &state.u) - su;
                let d2 = sin_to_basis(vs, &state.v) - sv;
                self.worst_increase = self.worst_increase.max(d1).max(d2);
                self.expansions += 1;
            }
        }
        for (basis, block) in [(&state.u, &defl.u), (&state.v, &defl.v)] {
            if block.ncols() > 0 {
                let g = block.t_matmul(basis);
                self.worst_defl_overlap = self.worst_defl_overlap.max(g.max_abs());
            }
        }
    }

    fn on_converged(&mut self, t: &ApproxTriplet, _d: &DeflationSet) {
        self.converged.push(t.theta);
    }
}

#[test]
fn expansion_never_degrades_and_deflation_stays_orthogonal() {
    let p = &acceptance_suite(8).unwrap()[9];
    let svd = dense_svd(&p.a.to_dense()).unwrap();
    let mut order: Vec<usize> = (0..svd.sigma.len()).collect();
    order.sort_by(|&i, &j| (svd.sigma[i] - p.tau).abs().total_cmp(&(svd.sigma[j] - p.tau).abs()));
    let l = 3;
    let cfg = SolverConfig::new(p.tau, l);
    let mut q = Quality {
        targets: order[..l]
            .iter()
            .map(|&i| (svd.u.col(i).to_vec(), svd.v.col(i).to_vec()))
            .collect(),
        before: None,
        worst_increase: 0.0,
        worst_defl_overlap: 0.0,
        expansions: 0,
        converged: Vec::new(),
        redetected: 0,
        tol_abs: p.a.one_norm() * cfg.tol,
    };
    let sol = solve_observed(&p.a, &cfg, &mut q).unwrap();
    assert_eq!(sol.triplets.len(), l);
    assert!(q.expansions > 5);
    assert!(q.worst_increase <= 1e-12, "{}", q.worst_increase);
    assert!(q.worst_defl_overlap <= 1e-10, "{}", q.worst_defl_overlap);
    assert_eq!(q.redetected, 0);
    assert_eq!(q.converged.len(), l);
}

#[test]
fn matrix_market_to_solution_and_histories() {
    let dir = tempfile::tempdir().unwrap();
    let p = &acceptance_suite(12).unwrap()[6];
    let path = dir.path().join("a.mtx");
    write_matrix_market(&p.a, &path).unwrap();
    let a = load_matrix_market(&path).unwrap();
    assert_eq!((a.nrows(), a.ncols(), a.nnz()), (p.a.nrows(), p.a.ncols(), p.a.nnz()));
    let sol = solve(&a, &SolverConfig::new(p.tau, 2)).unwrap();
    let h = dir.path().join("h.csv");
    write_history_csv(&sol.history, &h).unwrap();
    assert_eq!(read_history_csv(&h).unwrap(), sol.history);
    let r = dir.path().join("r.csv");
    write_results_csv(&sol.triplets, &r).unwrap();
    let back = read_results_csv(&r).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].1, sol.triplets[0].theta);
    // a converged triplet closes with a zero-inner record
    assert_eq!(sol.history.records.iter().filter(|r| r.inner_iters == 0).count(), 2);
}

#[test]
fn verify_run_on_diagonal_passes() {
    let out = verify_run(&diag3(), &SolverConfig::new(1.9, 2)).unwrap();
    assert_eq!(out.verifier.failures().count(), 0);
    assert_eq!(out.solution.triplets.len(), 2);
}

#[test]
fn max_outer_returns_partial_results() {
    let p = &acceptance_suite(13).unwrap()[0];
    let cfg = SolverConfig {
        max_outer: 4,
        ..SolverConfig::new(p.tau, 2)
    };
    let sol = solve(&p.a, &cfg).unwrap();
    assert_eq!(sol.status, SolveStatus::MaxOuterReached);
    assert!(sol.triplets.len() < 2);
    assert_eq!(sol.outer_iterations(), 4);
}

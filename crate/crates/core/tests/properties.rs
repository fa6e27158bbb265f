use jdsvd::correction::{inner_tolerance, minres_solve, ProjectedOperator};
use jdsvd::diagnostics::{exact_correction_solution, expansion_error_metrics, refined_minimum, Oracle};
use jdsvd::driver::{projected_residual, ConvergenceHistory, HistoryRecord};
use jdsvd::eig::{dense_svd, sym_definite_gen_eig, sym_eig};
use jdsvd::extraction::{harmonic_extract, refine, refined_harmonic_extract, residual, triplet_from_coeffs, SearchState};
use jdsvd::history::{read_history_csv, write_history_csv};
use jdsvd::{orthonormalize_against, vecops, DenseMatrix, SparseMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random::<f64>() < density {
                t.push((i, j, rng.random_range(-2.0..2.0)));
            }
        }
    }
    t.push((0, 0, 1.0));
    SparseMatrix::from_triplets(m, n, t).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_basis(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DenseMatrix {
    let mut b = DenseMatrix::with_capacity(n, k);
    while b.ncols() < k {
        if let Some(x) = orthonormalize_against(&random_vec(rng, n), &b).into_vector() {
            b.push_col(&x);
        }
    }
    b
}

fn random_state(rng: &mut ChaCha8Rng, a: &SparseMatrix, k: usize) -> SearchState {
    let mut st = SearchState::new(a.nrows(), a.ncols(), k);
    let ub = random_basis(rng, a.nrows(), k);
    let vb = random_basis(rng, a.ncols(), k);
    for j in 0..k {
        st.expand(a, ub.col(j), vb.col(j)).unwrap();
    }
    st
}

/// `‖C w - rho w‖` for the stacked unit vector `[u; v] / sqrt 2`.
fn stacked_residual(a: &SparseMatrix, rho: f64, u: &[f64], v: &[f64]) -> f64 {
    let (_, n) = residual(a, rho, u, v).unwrap();
    n / std::f64::consts::SQRT_2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn adjoint_products(seed in any::<u64>(), m in 1usize..40, n in 1usize..40, density in 0.02f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, density);
        let x = random_vec(&mut rng, n);
        let y = random_vec(&mut rng, m);
        let lhs = vecops::dot(&a.apply(&x).unwrap(), &y);
        let rhs = vecops::dot(&x, &a.apply_transpose(&y).unwrap());
        let scale = a.frobenius() * vecops::norm2(&x) * vecops::norm2(&y);
        prop_assert!((lhs - rhs).abs() <= 1e-14 * scale.max(1.0));
    }

    #[test]
    fn one_norm_matches_dense(seed in any::<u64>(), m in 1usize..30, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, 0.3);
        let d = a.to_dense();
        let want = (0..n).map(|j| d.col(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        prop_assert_eq!(a.one_norm(), want);
    }

    #[test]
    fn orthonormalize_is_orthogonal_or_rejects(seed in any::<u64>(), n in 2usize..30, k in 0usize..6, inside in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(n - 1);
        let b = random_basis(&mut rng, n, k);
        let mut v = random_vec(&mut rng, n);
        if inside && k > 0 {
            v = b.mul_vec(&random_vec(&mut rng, k));
            let e = random_vec(&mut rng, n);
            vecops::axpy(1e-15, &e, &mut v);
        }
        if let Some(x) = orthonormalize_against(&v, &b).into_vector() {
            prop_assert!((vecops::norm2(&x) - 1.0).abs() <= 1e-12);
            for c in b.cols() {
                prop_assert!(vecops::dot(c, &x).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_eigensolvers(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        s.symmetrize();
        let e = sym_eig(&s).unwrap();
        let trace: f64 = (0..n).map(|i| s[(i, i)]).sum();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-12 * s.frobenius().max(1.0) * n as f64);
        prop_assert!(e.vectors.orthonormality_error() <= 1e-12);
        let g = sym_definite_gen_eig(&s, &DenseMatrix::identity(n)).unwrap();
        let mut mu = g.mu.clone();
        mu.sort_by(f64::total_cmp);
        for (x, y) in mu.iter().zip(&e.values) {
            prop_assert!((x - y).abs() <= 1e-12 * s.frobenius().max(1.0));
        }
    }

    #[test]
    fn dense_svd_shape(seed in any::<u64>(), m in 1usize..15, n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let s = dense_svd(&a).unwrap();
        prop_assert!(s.sigma.iter().all(|&x| x >= 0.0));
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..s.sigma.len() {
            let av = a.mul_vec(s.v.col(i));
            let err: f64 = av.iter().zip(s.u.col(i)).map(|(p, q)| (p - s.sigma[i] * q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * s.sigma[0].max(1e-300));
        }
    }

    #[test]
    fn extraction_optimality_and_refinement(seed in any::<u64>(), m in 6usize..25, n in 6usize..25, k in 1usize..5, tau in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, 0.4);
        let st = random_state(&mut rng, &a, k);
        let h = harmonic_extract(&st, tau).unwrap();
        prop_assert!(h.theta >= 0.0);
        let (u, v, _, rn) = triplet_from_coeffs(&st, h.theta, &h.c, &h.d);
        for _ in 0..100 {
            let other = h.theta + rng.random_range(-3.0..3.0);
            let (_, ro) = residual(&a, other, &u, &v).unwrap();
            prop_assert!(rn <= ro * (1.0 + 1e-12) + 1e-14);
        }
        let r = refined_harmonic_extract(&st, &h).unwrap();
        prop_assert!(r.theta >= 0.0);
        // the refined vector minimizes the stacked residual before its halves are rescaled
        prop_assert!(refined_minimum(&st, h.theta).unwrap() <= stacked_residual(&a, h.theta, &u, &v) + 1e-10);
        let (c, d, _, _) = refine(&st, h.theta).unwrap();
        prop_assert!((vecops::norm2(&c) - 1.0).abs() < 1e-12 && (vecops::norm2(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_and_inner_solution(seed in any::<u64>(), m in 4usize..20, n in 4usize..20, k in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, 0.5);
        let k = k.min(m.min(n) - 2);
        let q = random_basis(&mut rng, m, k + 1);
        let z = random_basis(&mut rng, n, k + 1);
        let op = ProjectedOperator::new(&a, rng.random_range(0.2..1.5), q.clone(), z.clone()).unwrap();
        let x = random_vec(&mut rng, m + n);
        let mut once = x.clone();
        op.project(&mut once);
        let mut twice = once.clone();
        op.project(&mut twice);
        prop_assert!(once.iter().zip(&twice).all(|(p, q)| (p - q).abs() <= 1e-14));

        let rep = minres_solve(&op, &once, 1e-6, 4 * (m + n)).unwrap();
        prop_assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
        for c in q.cols() {
            prop_assert!(vecops::dot(c, &rep.s).abs() <= 1e-10 * vecops::norm2(&rep.s).max(1.0));
        }
        for c in z.cols() {
            prop_assert!(vecops::dot(c, &rep.t).abs() <= 1e-10 * vecops::norm2(&rep.t).max(1.0));
        }
        let rp = projected_residual(&x, &q, &z);
        prop_assert!(q.t_mul_vec(&rp[..m]).iter().all(|e| e.abs() <= 1e-13));
    }

    #[test]
    fn inner_tolerance_is_capped(nu in proptest::collection::vec(-5.0f64..5.0, 1..8), tau in 0.1f64..3.0, theta in 0.0f64..5.0, eps in 1e-6f64..1.0) {
        let (eta, c) = inner_tolerance(&nu, 0, tau, theta, nu.len(), eps);
        prop_assert!(eta <= 0.01 && eta > 0.0);
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn projected_error_never_exceeds_side_maximum(seed in any::<u64>(), n in 3usize..20, k in 1usize..3, scale in -8.0f64..0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ub = random_basis(&mut rng, n, k);
        let vb = random_basis(&mut rng, n + 1, k);
        let s = random_vec(&mut rng, n);
        let t = random_vec(&mut rng, n + 1);
        let d = 10f64.powf(scale);
        let st: Vec<f64> = s.iter().map(|x| x + d * rng.random_range(-1.0..1.0)).collect();
        let tt: Vec<f64> = t.iter().map(|x| x + 3.0 * d * rng.random_range(-1.0..1.0)).collect();
        if let Some(e) = expansion_error_metrics(&s, &t, &st, &tt, &ub, &vb) {
            prop_assert!(e.eps_hat <= e.eps_tilde + 1e-12);
        }
    }

    #[test]
    fn history_csv_round_trip(vals in proptest::collection::vec((any::<f64>(), 0usize..1000, any::<bool>()), 1..20)) {
        let records: Vec<HistoryRecord> = vals
            .iter()
            .enumerate()
            .map(|(i, &(x, it, cap))| {
                let x = if x.is_finite() { x } else { 0.0 };
                HistoryRecord { outer: i + 1, triplet: 1, m: it % 20 + 1, theta: x.abs(), resnorm: x.abs() / 3.0, inner_iters: it, eta: 1e-3, r_in: x / 7.0, hit_cap: cap, secs: 1e-4 }
            })
            .collect();
        let h = ConvergenceHistory { records };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        write_history_csv(&h, &p).unwrap();
        prop_assert_eq!(read_history_csv(&p).unwrap(), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    #[test]
    fn tight_minres_matches_closed_form(seed in any::<u64>(), m in 5usize..25, n in 5usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, 0.5);
        let tau = rng.random_range(0.3..1.2);
        let Ok(o) = Oracle::new(&a, tau) else { return Ok(()) };
        // keep the shifted system reasonably conditioned
        if o.svd().sigma.iter().any(|s| (s - tau).abs() < 1e-2) {
            return Ok(());
        }
        let mut u = random_vec(&mut rng, m);
        let mut v = random_vec(&mut rng, n);
        vecops::normalize(&mut u);
        vecops::normalize(&mut v);
        let mut theta = vecops::dot(&u, &a.apply(&v).unwrap());
        if theta < 0.0 {
            vecops::scale(-1.0, &mut v);
            theta = -theta;
        }
        let empty_u = DenseMatrix::zeros(m, 0);
        let empty_v = DenseMatrix::zeros(n, 0);
        let ex = exact_correction_solution(&o, theta, &u, &v, &empty_u, &empty_v).unwrap();
        let (r, _) = residual(&a, theta, &u, &v).unwrap();
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let op = ProjectedOperator::new(
            &a,
            tau,
            DenseMatrix::from_cols(m, &[u.clone()]),
            DenseMatrix::from_cols(n, &[v.clone()]),
        )
        .unwrap();
        let rep = minres_solve(&op, &rhs, 1e-14, 20 * (m + n)).unwrap();
        let mut x = ex.s.clone();
        x.extend_from_slice(&ex.t);
        let mut y = rep.s.clone();
        y.extend_from_slice(&rep.t);
        let nx = vecops::norm2(&x);
        prop_assume!(nx > 0.0);
        prop_assert!(vecops::norm2(&vecops::sub(&x, &y)) <= 1e-8 * nx, "r_in {}", rep.r_in);
    }
}

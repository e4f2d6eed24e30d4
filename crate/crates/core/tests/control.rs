mod common;

use common::{abscissa, lyapunov_quadrature, normal_matrix, random_stable, rng, spectral_norm, M};
use proptest::prelude::*;
use stabilize_core::control::{lqr_gain, riccati_operator, solve_care, solve_lyapunov, DEFAULT_CARE_MAX_ITER, DEFAULT_CARE_TOL};
use stabilize_core::Error;

/// Random `(A, B)` with `p` states and `q` inputs; `B` has full row rank
/// when `q >= p`, otherwise controllability holds with probability one.
fn system(seed: u64, p: usize, q: usize) -> (M, M) {
    let mut g = rng(seed);
    (normal_matrix(p, p, &mut g), normal_matrix(p, q, &mut g))
}

fn weights(seed: u64, p: usize, q: usize) -> (M, M) {
    let mut g = rng(seed ^ 0x5eed);
    let fq = normal_matrix(p, p, &mut g);
    let fr = normal_matrix(q, q, &mut g);
    (&fq * fq.transpose() + M::identity(p, p), &fr * fr.transpose() + M::identity(q, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn care_solution_certifies_itself(seed in any::<u64>(), p in 1usize..=5, q in 1usize..=3) {
        let (a, b) = system(seed, p, q);
        let (qw, rw) = weights(seed, p, q);
        let sol = solve_care(&a, &b, &qw, &rw, DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER).unwrap();
        let res = riccati_operator(&a, &b, &qw, &rw, &sol.p).unwrap();
        let scale = 1.0 + qw.norm() + 2.0 * a.norm() * sol.p.norm() + (&b * b.transpose()).norm() * sol.p.norm().powi(2);
        prop_assert!(spectral_norm(&res) <= 1e-8 * scale);
        prop_assert!((&sol.p - sol.p.transpose()).norm() <= 1e-12 * (1.0 + sol.p.norm()));
        prop_assert!(sol.p.clone().symmetric_eigen().eigenvalues.min() > -1e-9 * sol.p.norm());
        let k = lqr_gain(&a, &b, &qw, &rw).unwrap();
        prop_assert!(abscissa(&(&a + &b * k)) < 0.0);
    }

    #[test]
    fn care_scaling(seed in any::<u64>(), p in 1usize..=4, q in 1usize..=2, alpha in 0.1..10.0f64) {
        let (a, b) = system(seed, p, q);
        let (qw, rw) = weights(seed, p, q);
        let base = solve_care(&a, &b, &qw, &rw, DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER).unwrap().p;
        let scaled = solve_care(&a, &b, &(&qw * alpha), &(&rw * alpha), DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER).unwrap().p;
        prop_assert!((&scaled - &base * alpha).norm() <= 1e-9 * alpha * (1.0 + base.norm()));
        let k1 = lqr_gain(&a, &b, &qw, &rw).unwrap();
        let k2 = lqr_gain(&a, &b, &(&qw * alpha), &(&rw * alpha)).unwrap();
        prop_assert!((&k1 - &k2).norm() <= 1e-9 * (1.0 + k1.norm()));
    }

    #[test]
    fn lyapunov_residual_vanishes(seed in any::<u64>(), n in 1usize..=6) {
        let mut g = rng(seed);
        let d = random_stable(n, 0.3, &mut g);
        let f = normal_matrix(n, n, &mut g);
        let w = &f * f.transpose();
        let m = solve_lyapunov(&d, &w).unwrap();
        let res = d.transpose() * &m + &m * &d + &w;
        prop_assert!(res.norm() <= 1e-9 * (1.0 + w.norm() + d.norm() * m.norm()));
    }
}

#[test]
fn lyapunov_matches_quadrature() {
    let mut g = rng(11);
    for n in [2, 3, 4] {
        let d = random_stable(n, 1.0, &mut g);
        let w = M::identity(n, n);
        let got = solve_lyapunov(&d, &w).unwrap();
        let oracle = lyapunov_quadrature(&d, &w, 40.0, (1600.0 * (1.0 + spectral_norm(&d))) as usize);
        assert!((&got - &oracle).norm() <= 1e-6 * oracle.norm());
    }
}

#[test]
fn lyapunov_rejects_unstable() {
    let d = M::identity(2, 2);
    assert!(matches!(solve_lyapunov(&d, &d), Err(Error::InvalidInput(_))));
}

#[test]
fn care_rejects_bad_weights() {
    let a = M::identity(2, 2);
    let b = M::identity(2, 2);
    let indefinite = -M::identity(2, 2);
    assert!(solve_care(&a, &b, &M::identity(2, 2), &indefinite, DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER).is_err());
    assert!(matches!(
        solve_care(&a, &M::zeros(3, 1), &M::identity(2, 2), &M::identity(1, 1), DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER),
        Err(Error::Dimension(_))
    ));
}

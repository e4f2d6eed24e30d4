mod common;

use common::{abscissa, normal_matrix, rng, taylor_exp, M};
use proptest::prelude::*;
use stabilize_core::linalg::{eigenvalues, matrix_exponential, operator_norm, spectral_abscissa};

fn square(max: usize) -> impl Strategy<Value = M> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |v| M::from_vec(n, n, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn abscissa_matches_schur_reference(m in square(6)) {
        let got = spectral_abscissa(&m).unwrap();
        let want = abscissa(&m);
        prop_assert!((got - want).abs() <= 1e-8 * (1.0 + m.norm()), "{got} vs {want}");
    }

    #[test]
    fn eigenvalue_sums_match_trace(m in square(6)) {
        let eig = eigenvalues(&m).unwrap();
        prop_assert_eq!(eig.len(), m.nrows());
        let re: f64 = eig.iter().map(|z| z.re).sum();
        let im: f64 = eig.iter().map(|z| z.im).sum();
        prop_assert!((re - m.trace()).abs() <= 1e-8 * (1.0 + m.norm()));
        prop_assert!(im.abs() <= 1e-8 * (1.0 + m.norm()));
    }

    #[test]
    fn abscissa_is_similarity_invariant(m in square(5), seed in any::<u64>()) {
        let n = m.nrows();
        let t = normal_matrix(n, n, &mut rng(seed)) + M::identity(n, n) * 3.0;
        prop_assume!(t.clone().svd(false, false).singular_values.min() > 0.5);
        let similar = &t * &m * t.clone().try_inverse().unwrap();
        let (a, b) = (spectral_abscissa(&m).unwrap(), spectral_abscissa(&similar).unwrap());
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + m.norm()), "{a} vs {b}");
    }

    #[test]
    fn exponential_semigroup(m in square(4), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let lhs = matrix_exponential(&m, s + t).unwrap();
        let rhs = matrix_exponential(&m, s).unwrap() * matrix_exponential(&m, t).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn exponential_matches_taylor(m in square(4), t in -1.0..1.0f64) {
        let got = matrix_exponential(&m, t).unwrap();
        let want = taylor_exp(&(&m * t));
        prop_assert!((&got - &want).norm() <= 1e-11 * (1.0 + want.norm()));
    }

    #[test]
    fn operator_norm_bounds(m in square(5)) {
        let n = operator_norm(&m).unwrap();
        prop_assert!(n <= m.norm() * (1.0 + 1e-12));
        prop_assert!(n * (m.nrows() as f64).sqrt() >= m.norm() * (1.0 - 1e-12));
    }
}

#[test]
fn non_finite_input_is_rejected() {
    let mut m = M::identity(2, 2);
    m[(0, 1)] = f64::NAN;
    assert!(spectral_abscissa(&m).is_err());
    assert!(matrix_exponential(&m, 1.0).is_err());
    assert!(spectral_abscissa(&M::zeros(2, 3)).is_err());
}

use cfx_core::norms::{
    basis_containing, dual_maximizer, dual_norm_eval, norm_equivalence_constant, norm_eval, norm_gradient,
    subdiff_contains,
};
use cfx_core::{NormKind, Tolerance, Vector};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = NormKind> {
    prop_oneof![
        Just(NormKind::L1),
        Just(NormKind::L2),
        Just(NormKind::Linf),
        (1.1f64..8.0).prop_map(|q| NormKind::lp(q).unwrap()),
    ]
}

fn vector(p: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0f64..5.0, p).prop_map(|v| Vector::new(v).unwrap())
}

fn pair() -> impl Strategy<Value = (Vector, Vector)> {
    (1usize..8).prop_flat_map(|p| (vector(p), vector(p)))
}

proptest! {
    #[test]
    fn holder_inequality((a, x) in pair(), k in kind()) {
        let lhs = a.dot(&x).abs();
        let rhs = dual_norm_eval(&a, k) * norm_eval(&x, k);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn maximizer_attains_dual_norm((a, _) in pair(), k in kind()) {
        prop_assume!(a.max_abs() > 1e-6);
        let v = dual_maximizer(&a, k).unwrap();
        prop_assert!((norm_eval(&v, k) - 1.0).abs() <= 1e-9);
        let d = dual_norm_eval(&a, k);
        prop_assert!((a.dot(&v) - d).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn dual_of_dual_is_identity(k in kind()) {
        let back = k.dual().dual();
        prop_assert!((back.exponent() - k.exponent()).abs() <= 1e-9 || back == k);
    }

    #[test]
    fn smooth_gradient_is_a_subgradient((x, _) in pair(), q in 1.1f64..8.0) {
        prop_assume!(x.max_abs() > 1e-6);
        let k = NormKind::lp(q).unwrap();
        let g = norm_gradient(&x, k).unwrap();
        prop_assert!(subdiff_contains(&x, &g, k, Tolerance::new(1e-8, 1e-8)));
        prop_assert!((dual_norm_eval(&g, k) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn equivalence_constant_bounds_ratio((x, _) in pair(), up in kind(), lo in kind()) {
        prop_assume!(x.max_abs() > 1e-6);
        let c = norm_equivalence_constant(up, lo, x.dim());
        prop_assert!(norm_eval(&x, up) <= c * norm_eval(&x, lo) * (1.0 + 1e-9));
    }

    #[test]
    fn basis_starts_with_vector_and_spans((x, _) in pair()) {
        prop_assume!(x.max_abs() > 1e-3);
        let b = basis_containing(&x).unwrap();
        prop_assert_eq!(b.len(), x.dim());
        prop_assert_eq!(&b[0], &x);
        // the remaining vectors are orthonormal and orthogonal to x
        for (i, u) in b.iter().enumerate().skip(1) {
            prop_assert!(u.dot(&x).abs() <= 1e-9 * norm_eval(&x, NormKind::L2));
            prop_assert!((u.dot(u) - 1.0).abs() <= 1e-9);
            for w in b.iter().skip(i + 1) {
                prop_assert!(u.dot(w).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn l1_and_linf_maximizer_conventions() {
    let a = Vector::from_slice(&[1.0, -3.0, 3.0, 0.0]).unwrap();
    assert_eq!(dual_maximizer(&a, NormKind::L1).unwrap().as_slice(), &[0.0, -1.0, 0.0, 0.0]);
    assert_eq!(dual_maximizer(&a, NormKind::Linf).unwrap().as_slice(), &[1.0, -1.0, 1.0, 1.0]);
}

use proptest::prelude::*;

use s4factor::counterexample::holder_chain_check;
use s4factor::entropy::{capacity_lower_volumetric, cover_ellipsoid, validate_cover, DiagonalOperatorSpec};
use s4factor::gns::mix_faithful;
use s4factor::linalg::{abs_hermitian, eigh, schatten_norm};
use s4factor::rng::{random_complex_matrix, random_hermitian, random_unitary, stream_rng};
use s4factor::ComplexMatrix;

fn matrix(seed: u64, rows: usize, cols: usize) -> ComplexMatrix {
    random_complex_matrix(&mut stream_rng(seed, 0), rows, cols)
}

fn alphas() -> impl Strategy<Value = DiagonalOperatorSpec> {
    prop::collection::vec(0.0f64..1.0, 1..6).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        DiagonalOperatorSpec::new(v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schatten_norms_decrease_in_p(seed: u64, rows in 1usize..7, cols in 1usize..7, p in 1.0f64..6.0, dq in 0.0f64..6.0) {
        let a = matrix(seed, rows, cols);
        let q = p + dq;
        prop_assert!(schatten_norm(&a, q).unwrap() <= schatten_norm(&a, p).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn schatten_norms_are_unitarily_invariant(seed: u64, rows in 1usize..6, cols in 1usize..6, p in 1.0f64..8.0) {
        let a = matrix(seed, rows, cols);
        let mut rng = stream_rng(seed, 1);
        let u = random_unitary(&mut rng, rows);
        let v = random_unitary(&mut rng, cols);
        let b = &(&u * &a) * &v;
        let (x, y) = (schatten_norm(&a, p).unwrap(), schatten_norm(&b, p).unwrap());
        prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        let z = schatten_norm(&a.adjoint(), p).unwrap();
        prop_assert!((x - z).abs() <= 1e-10 * x.max(1.0));
    }

    #[test]
    fn abs_squares_to_square(seed: u64, n in 1usize..6) {
        let x = random_hermitian(&mut stream_rng(seed, 0), n);
        let a = abs_hermitian(&x, 1e-12).unwrap();
        let err = (&a * &a).sub(&(&x * &x)).frobenius_norm();
        prop_assert!(err <= 1e-10 * (&x * &x).frobenius_norm().max(1.0));
        prop_assert!(eigh(&a).min_value() >= -1e-10);
    }

    #[test]
    fn faithful_mixture_is_a_state(seed: u64, n in 1usize..5, delta in 1e-4f64..1.0) {
        let b = matrix(seed, n, n);
        let g = &b * &b.adjoint();
        let g = g.scale(1.0 / g.trace().re);
        let f = mix_faithful(&g, delta).unwrap();
        prop_assert!((f.density.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(eigh(&f.density).min_value() >= delta / (n as f64 * (1.0 + delta)) * (1.0 - 1e-9));
    }

    #[test]
    fn holder_chain_never_fails(seed: u64, rows in 1usize..8, cols in 1usize..8, p in 2.0f64..10.0) {
        let k = matrix(seed, rows, cols);
        prop_assert!(holder_chain_check(&k, p).unwrap().pass);
    }

    #[test]
    fn lattice_cover_sandwich_and_scaling(spec in alphas(), eps in 0.05f64..1.2) {
        let cover = cover_ellipsoid(&spec, eps).unwrap();
        prop_assert!(capacity_lower_volumetric(&spec, eps) <= cover.covering_count);
        let doubled = DiagonalOperatorSpec::new(spec.alphas().iter().map(|a| 2.0 * a).collect()).unwrap();
        prop_assert_eq!(cover_ellipsoid(&doubled, 2.0 * eps).unwrap().covering_count, cover.covering_count);
    }

    #[test]
    fn lattice_cover_is_valid(spec in alphas(), eps in 0.1f64..1.2, seed: u64) {
        let cover = cover_ellipsoid(&spec, eps).unwrap();
        let v = validate_cover(&spec, eps, &cover, 500, seed);
        prop_assert!(v.pass, "{:?}", v.witnesses);
    }
}

//! Property tests for the algebraic invariants of the Laurent engine and the
//! grid/transform round trips.

use mdframe_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_unit() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn poly(max_deg: i64) -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec((-max_deg..=max_deg, complex_unit()), 0..6)
        .prop_map(LaurentPoly::from_pairs)
}

fn matrix(side: usize, max_deg: i64) -> impl Strategy<Value = LaurentMatrix> {
    prop::collection::vec(poly(max_deg), side * side).prop_map(move |entries| {
        let mut m = LaurentMatrix::zero(side, side);
        for (k, p) in entries.into_iter().enumerate() {
            m.set(k / side, k % side, p);
        }
        m
    })
}

prop_compose! {
    fn window()(
        config in 0usize..4,
        i_min in -8i64..8,
        values in prop::collection::vec(complex_unit(), 1..14),
    ) -> StepFunction {
        let (delta, p, q, n) = [(2.0, 1, 1, 2), (2.0, 1, 2, 2), (2.0, 2, 3, 1), (1.5, 3, 4, 1)][config];
        let params = MDParams::new(delta, p, q).unwrap();
        StepFunction::new(params, n, i_min, values)
    }
}

proptest! {
    #[test]
    fn conj_reflect_is_an_involution(p in poly(5)) {
        prop_assert!(p.conj_reflect().conj_reflect().max_abs_diff(&p) == 0.0);
    }

    #[test]
    fn self_adjoint_products(p in poly(4)) {
        let h = &p * &p.conj_reflect();
        prop_assert!(h.conj_reflect().max_abs_diff(&h) < 1e-14);
    }

    #[test]
    fn parseval_on_the_circle(p in poly(4)) {
        let k = 512usize;
        let quad: f64 = (0..k).map(|t| p.eval(t as f64 / k as f64).norm_sqr()).sum::<f64>() / k as f64;
        let exact = p.l2_norm_sq();
        prop_assert!((quad - exact).abs() <= 1e-10 * exact.max(1e-30));
    }

    #[test]
    fn adjoint_reverses_matrix_products(a in matrix(2, 3), b in matrix(2, 3)) {
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn determinant_is_multiplicative(a in matrix(3, 2), b in matrix(3, 2)) {
        let det_ab = laurent_det(&(&a * &b)).unwrap();
        let det_a = laurent_det(&a).unwrap();
        let det_b = laurent_det(&b).unwrap();
        let scale = det_ab.max_coeff().max(1.0);
        prop_assert!(det_ab.max_abs_diff(&(&det_a * &det_b)) <= 1e-12 * scale);
    }

    #[test]
    fn dilation_preserves_norms(f in window(), k in -4i64..4) {
        let d = f.dilate(k);
        let norm = f.norm_sq();
        prop_assert!((d.norm_sq() - norm).abs() <= 1e-13 * norm.max(1e-30));
    }

    #[test]
    fn refinement_is_pointwise_exact(f in window(), factor in 1u32..4) {
        let r = f.refine(factor);
        for i in f.i_min()..f.i_max() {
            for sub in 0..factor as i64 {
                prop_assert_eq!(r.value(i * factor as i64 + sub), f.value(i));
            }
        }
        let norm = f.norm_sq();
        prop_assert!((r.norm_sq() - norm).abs() <= 1e-13 * norm.max(1e-30));
    }

    #[test]
    fn transform_round_trips(f in window()) {
        let back = theta_inverse(&theta(&f));
        prop_assert!(back.max_abs_diff(&f) < 1e-13);
        let matrix = transform_matrix(&f);
        let back = window_from_matrix(*f.params(), f.n(), matrix.cells()).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-13);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(f in window(), g in window()) {
        // Only comparable on a shared parameter set.
        if f.params() == g.params() {
            let fg = f.inner_product(&g);
            let gf = g.inner_product(&f);
            prop_assert!((fg.conj() - gf).norm() < 1e-13);
        }
    }
}

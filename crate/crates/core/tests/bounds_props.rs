use orlicz_lab::bounds::{self, ConstantSet, DecompositionParams, TailEnvelopeForm};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_is_exact_and_clipped(values in prop::collection::vec(-1e6f64..1e6, 1..40), theta in 1e-3f64..100.0) {
        let (phi, psi) = bounds::split(&values, theta).unwrap();
        for ((&x, &a), &b) in values.iter().zip(&phi).zip(&psi) {
            prop_assert_eq!(a + b, x);
            prop_assert!(a.abs() <= theta);
            prop_assert!(x.abs() <= theta || (a.signum() == x.signum() && b.signum() == x.signum()));
        }
    }

    #[test]
    fn truncated_part_satisfies_the_pointwise_inequality(x in -1e3f64..1e3, theta in 1e-2f64..10.0) {
        let (_, psi) = bounds::split(&[x], theta).unwrap();
        // |ψ| ≤ |x| 1{|x| > θ}
        prop_assert!(psi[0].abs() <= x.abs() * f64::from(x.abs() > theta) + 4.0 * f64::EPSILON * x.abs());
    }

    #[test]
    fn subset_sum_envelopes_grow_with_ell(k in 2usize..500, gamma2 in 0.1f64..10.0, diam in 0.1f64..10.0) {
        let mut prev = (0.0, 0.0);
        for ell in 1..=k.min(50) {
            let a = bounds::subset_sum_bound_psi1(ell, k, gamma2, diam, 1.0, 1.0).unwrap();
            let b = bounds::subset_sum_bound_psi2(ell, k, gamma2, diam, 1.0).unwrap();
            prop_assert!(a >= prev.0 && b >= prev.1);
            prev = (a, b);
        }
    }

    #[test]
    fn tail_envelope_decreases_in_t(k in 1usize..1000, gamma2 in 0.1f64..10.0, diam in 0.1f64..10.0, form in prop_oneof![Just(TailEnvelopeForm::SquaredV1), Just(TailEnvelopeForm::LinearV1)]) {
        let c = ConstantSet::default();
        let ts: Vec<f64> = (1..30).map(|i| 0.1 * i as f64).collect();
        let env: Vec<f64> = ts.iter().map(|&t| bounds::tail_envelope(t, k, gamma2, diam, &c, form).unwrap()).collect();
        prop_assert!(env.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deviation_bounds_are_positive_and_shrink_with_k(a in 1.5f64..5.0, b in 0.5f64..5.0, p in 1.0f64..6.0) {
        let c = ConstantSet::default();
        let small = bounds::combined_deviation_bound(a, b, p, 10, 1.0, &c).unwrap();
        let large = bounds::combined_deviation_bound(a, b, p, 100_000, 1.0, &c).unwrap();
        prop_assert!(small > 0.0 && large > 0.0 && large < small);
        let params = DecompositionParams::new(a, b, p, 1.0, 100, &c).unwrap();
        prop_assert!(bounds::truncation_level(&params, &c).unwrap() > 0.0);
    }
}

#[test]
fn bernstein_tail_is_two_at_zero_limit_and_decays() {
    let c = ConstantSet::default();
    let near = bounds::bernstein_tail(1e-12, 10, 1.0, &c).unwrap();
    assert!((near - 2.0).abs() < 1e-9);
    assert!(bounds::bernstein_tail(5.0, 10, 1.0, &c).unwrap() < 1e-20);
}

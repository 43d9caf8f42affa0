mod common;

use common::{any_form, form_with, positive, rng_for};
use critform::hardy::{
    abstract_hardy_gap, ground_state_transform, hardy_weight, inequality_tolerance, perturbed_hardy_bound,
    verify_hardy,
};
use critform::form::TOL_INEQ;
use critform::instances::Potential;
use critform::resolvent::GreenConfig;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ground_state_gap_is_nonnegative(seed in any::<u64>()) {
        let mut r = rng_for(seed);
        let form = any_form(&mut r, 30);
        let h = positive(&form, &mut r, 0.05, 3.0);
        for _ in 0..10 {
            let f = form.random_function(&mut r);
            let gap = abstract_hardy_gap(&form, &h, &f).unwrap();
            let hf = h.zip_with(&f, |a, b| a * b);
            prop_assert!(gap >= -inequality_tolerance(&form, &hf), "gap {}", gap);
        }
    }

    #[test]
    fn perturbed_bound_holds(seed in any::<u64>(), alpha in 0.01f64..5.0) {
        let mut r = rng_for(seed);
        let form = any_form(&mut r, 30);
        let g = positive(&form, &mut r, 0.05, 2.0);
        for _ in 0..10 {
            let f = form.random_function(&mut r);
            let b = perturbed_hardy_bound(&form, &g, alpha, &f).unwrap();
            prop_assert!(b.lhs >= b.rhs - inequality_tolerance(&form, &f) - 1e-12 * alpha * form.norm_sq(&f));
        }
    }

    #[test]
    fn generated_weights_pass(seed in any::<u64>()) {
        let mut r = rng_for(seed);
        let form = form_with(&mut r, 40, Potential::Sparse { hi: 1.0 }, true);
        let g = positive(&form, &mut r, 0.1, 1.0);
        let hw = hardy_weight(&form, &g, &GreenConfig::default(), seed).unwrap();
        prop_assert!(hw.verification.passed, "{:?}", hw.verification);
        for &i in form.free_vertices() {
            prop_assert!(hw.weight[i] > 0.0);
        }
    }

    #[test]
    fn sampled_ratio_never_beats_the_pencil(seed in any::<u64>()) {
        let mut r = rng_for(seed);
        let form = form_with(&mut r, 25, Potential::Positive { lo: 0.05, hi: 1.0 }, false);
        let w = positive(&form, &mut r, 0.1, 2.0);
        let v = verify_hardy(&form, &w, 200, seed).unwrap();
        let lambda = v.pencil_lambda.unwrap();
        prop_assert!(v.sampled_ratio <= lambda * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn transform_by_h_then_inverse_is_identity(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let mut r = rng_for(seed);
        let form = any_form(&mut r, 20);
        let h = positive(&form, &mut r, 0.2, 3.0);
        let tilde = ground_state_transform(&form, &h, alpha).unwrap();
        let back = ground_state_transform(&tilde, &h.map(|v| 1.0 / v), 0.0).unwrap();
        for _ in 0..5 {
            let f = form.random_function(&mut r);
            let qa = form.evaluate(&f).unwrap() + alpha * form.norm_sq(&f);
            let qb = back.evaluate(&f).unwrap();
            let scale = inequality_tolerance(&form, &f) / TOL_INEQ + alpha * form.norm_sq(&f);
            prop_assert!((qa - qb).abs() <= 1e-10 * scale.max(1e-300), "{} vs {}", qa, qb);
            let ratio = h.zip_with(&f, |a, b| b / a);
            let qt = tilde.evaluate(&ratio).unwrap();
            prop_assert!((qt - qa).abs() <= 1e-10 * scale.max(1e-300));
        }
    }
}

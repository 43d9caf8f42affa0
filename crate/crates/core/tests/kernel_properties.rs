mod common;

use common::{form_with, positive, rng_for};
use critform::instances::{random_kernel, Potential};
use critform::kernel::{
    check_super_eigen, construct_excessive, ergodicity_check, fatou_defect, harnack_sets, harnack_slack, ktilde,
    lambda_of, TOL_LAMBDA,
};
use critform::resolvent::is_excessive;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// `‖Tf‖_p^p / ‖f‖_p^p`, which never exceeds `λ(T)`.
fn lp_ratio(op: &critform::kernel::KernelOperator, f: &[f64]) -> f64 {
    let p = op.p();
    let tf = op.apply(f);
    let num: f64 = tf.iter().zip(op.nu()).map(|(v, m)| v.abs().powf(p) * m).sum();
    let den: f64 = f.iter().zip(op.mu()).map(|(v, m)| v.abs().powf(p) * m).sum();
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_matches_the_singular_value(seed in any::<u64>(), rows in 1usize..15, cols in 1usize..15) {
        let mut r = rng_for(seed);
        let op = random_kernel(&mut r, rows, cols, 2.0).unwrap();
        let res = lambda_of(&op, TOL_LAMBDA).unwrap();
        let k = op.kernel();
        let a = DMatrix::from_fn(rows, cols, |z, x| op.nu()[z].sqrt() * k[(z, x)] * op.mu()[x].sqrt());
        let s = a.singular_values().max();
        prop_assert!((res.lambda - s * s).abs() <= 1e-9 * s * s);
        prop_assert!(res.lower <= res.lambda);
        prop_assert!(check_super_eigen(&op, res.lambda, &res.witness).unwrap() <= 1e-12 * res.lambda);
    }

    #[test]
    fn lambda_dominates_every_lp_ratio(seed in any::<u64>(), p in 1.2f64..4.0) {
        let mut r = rng_for(seed);
        let (rows, cols) = (r.random_range(1..10), r.random_range(1..10));
        let op = random_kernel(&mut r, rows, cols, p).unwrap();
        let res = lambda_of(&op, 1e-10).unwrap();
        prop_assert!(res.witness.iter().all(|v| *v > 0.0));
        prop_assert!(check_super_eigen(&op, res.lambda, &res.witness).unwrap() <= 1e-12 * res.lambda);
        prop_assert!(lp_ratio(&op, &res.witness) <= res.lambda * (1.0 + 1e-9));
        for _ in 0..20 {
            let f: Vec<f64> = (0..cols).map(|_| r.random_range(-1.0..1.0)).collect();
            prop_assert!(lp_ratio(&op, &f) <= res.lambda * (1.0 + 1e-9));
        }
        // The witness nearly attains the norm.
        prop_assert!(lp_ratio(&op, &res.witness) >= res.lower * (1.0 - 1e-6));
    }

    #[test]
    fn ktilde_is_symmetric_and_positive(seed in any::<u64>(), rows in 1usize..10, cols in 1usize..10) {
        let mut r = rng_for(seed);
        let op = random_kernel(&mut r, rows, cols, 2.0).unwrap();
        let kt = ktilde(&op);
        prop_assert_eq!(&kt, &kt.transpose());
        prop_assert!(kt.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn harnack_inequality_holds_for_super_eigenfunctions(seed in any::<u64>(), mass in 0.1f64..1.0, p in 1.5f64..3.0) {
        let mut r = rng_for(seed);
        let (rows, cols) = (r.random_range(1..12), r.random_range(1..12));
        let op = random_kernel(&mut r, rows, cols, p).unwrap();
        let res = lambda_of(&op, 1e-10).unwrap();
        let cert = harnack_sets(&op, mass, res.lambda).unwrap();
        let total: f64 = op.mu().iter().sum();
        prop_assert!(cert.mass >= mass * total * (1.0 - 1e-12));
        prop_assert!(harnack_slack(&op, &cert, &res.witness) >= -1e-12 * cert.d);
        // Any positive multiple stays admissible.
        let scaled: Vec<f64> = res.witness.iter().map(|v| 7.5 * v).collect();
        prop_assert!(harnack_slack(&op, &cert, &scaled) >= -1e-11 * cert.d);
    }

    #[test]
    fn constant_test_function_exposes_proper_sets(seed in any::<u64>()) {
        let mut r = rng_for(seed);
        let n = r.random_range(2..10);
        let op = random_kernel(&mut r, n, n, 2.0).unwrap();
        let report = ergodicity_check(&op, &[0], 10, seed).unwrap();
        prop_assert!(report.violation > 0.0);
    }

    #[test]
    fn constructed_functions_are_excessive(seed in any::<u64>()) {
        let mut r = rng_for(seed);
        let potential = if seed % 2 == 0 { Potential::Zero } else { Potential::Sparse { hi: 1.0 } };
        let form = form_with(&mut r, 25, potential, seed % 3 == 0);
        prop_assume!(form.components().len() == 1);
        let g = positive(&form, &mut r, 0.1, 1.0);
        let res = construct_excessive(&form, &g, None, None).unwrap();
        prop_assert!(res.excessivity.excessive);
        prop_assert!(is_excessive(&form, &res.h, None, None).unwrap().excessive);
        let min_b = res.reference.iter().map(|&i| res.h[i]).fold(f64::INFINITY, f64::min);
        prop_assert!((min_b - 1.0).abs() <= 1e-8);
        let sup = form.free_vertices().iter().map(|&i| res.h[i]).fold(0.0, f64::max);
        prop_assert!(fatou_defect(&form, &res.h, &[0.1, 1.0, 10.0]).unwrap() <= 1e-8 * sup);
    }
}

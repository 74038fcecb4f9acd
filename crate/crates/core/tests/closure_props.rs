mod common;

use common::*;
use proptest::prelude::*;
use regulus::closure::{augment, lift_point, ClosureError};
use regulus::jacobian::q_value;
use regulus::term::evaluate;
use regulus::{FunctionSystem, Scalar, Term};

/// Polynomial system shifted to vanish exactly at a rational point.
fn system_through(seed: u64) -> (FunctionSystem, Vec<Scalar>) {
    let mut r = rng(seed);
    let sys = random_poly_system(&mut r);
    let x = rational_point(&mut r, sys.dim());
    let fs = sys
        .functions()
        .iter()
        .map(|f| f - &Term::constant(evaluate(f, &x).unwrap().to_exact().unwrap()))
        .collect();
    (FunctionSystem::new(sys.dim(), fs).unwrap(), x)
}

#[test]
fn singular_points_are_refused() {
    let sys = FunctionSystem::new(2, vec![parse("(* x1 x2)")]).unwrap();
    let err = lift_point(&sys, &[Scalar::zero(), Scalar::zero()], 0.0, 0.0).unwrap_err();
    assert!(matches!(err, ClosureError::NotRegular { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lift_round_trip(seed in any::<u64>()) {
        let (sys, x) = system_through(seed);
        prop_assume!(is_positive(&q_value(&sys, &x).unwrap()));
        let lifted = lift_point(&sys, &x, 0.0, 0.0).unwrap();
        prop_assert_eq!(&lifted[..sys.dim()], &x[..]);
        let aug = augment(&sys).unwrap();
        for f in aug.functions() {
            prop_assert!(evaluate(f, &lifted).unwrap().is_zero());
        }
        // `x_{n+1}·Q = 1` on the lift.
        let q = q_value(&sys, &x).unwrap();
        prop_assert_eq!(&lifted[sys.dim()] * &q, Scalar::one());
    }

    #[test]
    fn augmented_witness_dominates_cube(seed in any::<u64>()) {
        let (sys, x) = system_through(seed);
        let q = q_value(&sys, &x).unwrap();
        prop_assume!(is_positive(&q));
        let lifted = lift_point(&sys, &x, 0.0, 0.0).unwrap();
        let q0 = q_value(&augment(&sys).unwrap(), &lifted).unwrap();
        prop_assert!(q0.is_exact());
        prop_assert!(q0.cmp_value(&q.powi(3)).is_ge());
    }
}

mod common;

use common::*;
use proptest::prelude::*;
use regulus::jet::taylor;
use regulus::term::{d_alpha, multi_indices, partial};
use regulus::Scalar;

#[test]
fn printed_forms_reparse() {
    for src in ["(- x2 (exp x1))", "(^ (+ x1 (/ 3 2)) 3)", "(* x1 x2 (exp (* -2 x1)))", "0", "(/ -7 4)"] {
        let t = parse(src);
        let again = parse(&t.to_string());
        assert_eq!(t, again, "{src}");
    }
}

#[test]
fn exact_evaluation_on_polynomials() {
    let t = parse("(+ (^ x1 2) (* (/ 1 3) x2))");
    let v = regulus::term::evaluate(&t, &[Scalar::ratio(1, 2), Scalar::int(3)]).unwrap();
    assert_eq!(v, Scalar::ratio(5, 4));
    assert!(v.is_exact());
}

#[test]
fn exp_derivatives_are_exp() {
    let e = exp(parse("x1"));
    let mut d = e.clone();
    for _ in 0..5 {
        d = partial(&d, 1);
        assert_eq!(d, e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_term(&mut r, 3, 3);
        let back = parse(&t.to_string());
        let x = float_point(&mut r, 3, -1.0, 1.0);
        prop_assert!(rel_err(eval(&back, &x), eval(&t, &x)) < 1e-12);
    }

    #[test]
    fn mixed_partials_commute(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_term(&mut r, 3, 3);
        let x = float_point(&mut r, 3, -1.0, 1.0);
        for i in 1..=3 {
            for j in 1..=3 {
                let a = eval(&partial(&partial(&t, i), j), &x);
                let b = eval(&partial(&partial(&t, j), i), &x);
                prop_assert!(rel_err(a, b) < 1e-10, "{t}: d{i}d{j} {a} vs {b}");
            }
        }
    }

    #[test]
    fn partials_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_term(&mut r, 2, 3);
        let x = float_point(&mut r, 2, -1.0, 1.0);
        let g = |y: &[f64]| eval(&t, y);
        for i in 0..2 {
            let mut a = [0u32; 2];
            a[i] = 1;
            let sym = eval(&partial(&t, i + 1), &x);
            let fd = richardson(&g, &x, &a, 1e-3);
            prop_assert!(rel_err(sym, fd) < 1e-7, "{t}: {sym} vs {fd}");
        }
    }

    #[test]
    fn jets_agree_with_symbolic_derivatives(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_term(&mut r, 2, 3);
        let x = float_point(&mut r, 2, -1.0, 1.0);
        let jet = taylor(&t, &x, 4).unwrap();
        for alpha in multi_indices(2, 4) {
            let sym = eval(&d_alpha(&t, &alpha), &x);
            prop_assert!(rel_err(jet.derivative(&alpha), sym) < 1e-9, "{t} at {alpha}");
        }
    }

    #[test]
    fn partial_in_absent_variable_is_zero(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_term(&mut r, 2, 3);
        prop_assert!(partial(&t, 3).is_zero_term());
    }
}

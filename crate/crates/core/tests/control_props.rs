mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use regulus::chart::Chart;
use regulus::control::{
    basic_control, combine, control_for_term, implicit_control, sample_box, verify_control, ChartSource,
    CombineOp, ControlData, ControlError, TermSource,
};
use regulus::term::partial;
use regulus::FunctionSystem;

fn source(t: &regulus::Term, n: usize) -> TermSource {
    TermSource { term: t.clone(), dim: n }
}

#[test]
fn exp_template_passes_on_wide_box() {
    let d = basic_control("exp", 4).unwrap();
    let pts = sample_box(&[(-3.0, 3.0)], 100, 7);
    let r = verify_control(&source(&parse("(exp x1)"), 1), &d, &pts, 4).unwrap();
    assert!(r.pass && r.max_ratio <= 1.0);
}

#[test]
fn halved_template_fails_with_witness() {
    let d = basic_control("exp", 4).unwrap();
    let mut bad = d.clone();
    bad.c[0] *= 0.5;
    let pts = sample_box(&[(-3.0, 3.0)], 100, 7);
    let r = verify_control(&source(&parse("(exp x1)"), 1), &bad, &pts, 4).unwrap();
    assert!(!r.pass);
    assert_eq!(r.worst_alpha.order(), 0);
    assert_eq!(r.worst_point.len(), 1);
}

#[test]
fn unknown_basic_is_rejected() {
    assert!(matches!(basic_control("sin", 2), Err(ControlError::UnknownBasic(_))));
}

#[test]
fn sum_of_constants() {
    let d = combine(CombineOp::Sum, &[&ControlData::constant(2.0, 3), &ControlData::constant(-0.5, 3)]);
    assert_eq!(d.c[0], 2.5);
}

#[test]
fn implicit_exp_graph_matches_true_derivatives() {
    let sys = FunctionSystem::new(2, vec![parse("(- x2 (exp x1))")]).unwrap();
    let chart = Chart::new(sys.clone(), vec![0], vec![1], vec![0.0, 1.0]).unwrap();
    let cd = control_for_term(&sys.functions()[0], 2, 4).unwrap();
    let ic = implicit_control(&chart, &cd, 4).unwrap();
    let pts = sample_box(&[(-2.0, 2.0)], 100, 3);
    let r = verify_control(&ChartSource { chart: &chart, solved_index: 0 }, &ic, &pts, 4).unwrap();
    assert!(r.pass, "{r:?}");
    // The chart is `exp`: its derivatives are checked against the closed form.
    let direct = verify_control(&source(&parse("(exp x1)"), 1), &ic, &pts, 4).unwrap();
    assert!(direct.pass);
}

#[test]
fn implicit_circle_chart_against_differences() {
    let sys = FunctionSystem::new(2, vec![parse("(+ (^ x1 2) (^ x2 2) -1)")]).unwrap();
    let chart = Chart::new(sys.clone(), vec![1], vec![0], vec![1.0, 0.0]).unwrap();
    let cd = control_for_term(&sys.functions()[0], 2, 3).unwrap();
    let ic = implicit_control(&chart, &cd, 3).unwrap();
    let pts = sample_box(&[(-0.5, 0.5)], 100, 5);
    let r = verify_control(&ChartSource { chart: &chart, solved_index: 0 }, &ic, &pts, 3).unwrap();
    assert!(r.pass, "{r:?}");
    // Chart derivatives themselves agree with differences of √(1 − y²).
    let g = |y: &[f64]| (1.0 - y[0] * y[0]).sqrt();
    for y in pts.iter().take(10) {
        let jet = chart.jets(y, 3).unwrap();
        for k in 1..=3u32 {
            let alpha = regulus::MultiIndex::new(vec![k]);
            let fd = richardson(&g, y, &[k], 1e-2);
            assert!(rel_err(jet[0].derivative(&alpha), fd) < 1e-6, "{y:?} order {k}");
        }
    }
}

#[test]
fn affine_chart_has_vanishing_higher_orders() {
    let sys = FunctionSystem::new(2, vec![parse("(+ (* 2 x1) (* -3 x2) 1)")]).unwrap();
    let chart = Chart::new(sys.clone(), vec![0], vec![1], vec![1.0, 1.0]).unwrap();
    let cd = control_for_term(&sys.functions()[0], 2, 3).unwrap();
    let ic = implicit_control(&chart, &cd, 3).unwrap();
    let pts = sample_box(&[(-2.0, 2.0)], 50, 1);
    let r = verify_control(&ChartSource { chart: &chart, solved_index: 0 }, &ic, &pts, 3).unwrap();
    assert!(r.pass);
    assert!(r.per_order[2] < 1e-12 && r.per_order[3] < 1e-12, "{:?}", r.per_order);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagated_controls_are_sound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=2);
        let t = random_controlled_term(&mut r, n, 3);
        let d = control_for_term(&t, n, 4).unwrap();
        let pts = sample_box(&vec![(-2.0, 2.0); n], 100, seed);
        let rep = verify_control(&source(&t, n), &d, &pts, 4).unwrap();
        prop_assert!(rep.pass, "{t}: {rep:?}");
    }

    #[test]
    fn enlarging_constants_preserves_pass(seed in any::<u64>(), grow in 1.0f64..10.0, bump in 0u32..3) {
        let mut r = rng(seed);
        let t = random_controlled_term(&mut r, 2, 3);
        let d = control_for_term(&t, 2, 4).unwrap();
        let pts = sample_box(&[(-2.0, 2.0), (-2.0, 2.0)], 60, seed);
        let before = verify_control(&source(&t, 2), &d, &pts, 4).unwrap();
        let mut bigger = d.clone();
        for (c, e) in bigger.c.iter_mut().zip(bigger.e.iter_mut()) {
            *c *= grow;
            *e += bump;
        }
        let after = verify_control(&source(&t, 2), &bigger, &pts, 4).unwrap();
        prop_assert!(!before.pass || after.pass);
        prop_assert!(after.max_ratio <= before.max_ratio * (1.0 + 1e-12));
    }

    #[test]
    fn shifted_data_controls_partials(seed in any::<u64>(), j in 1usize..=2) {
        let mut r = rng(seed);
        let t = random_controlled_term(&mut r, 2, 3);
        let d = control_for_term(&t, 2, 4).unwrap();
        let pts = sample_box(&[(-2.0, 2.0), (-2.0, 2.0)], 60, seed);
        let full = verify_control(&source(&t, 2), &d, &pts, 4).unwrap();
        let shifted = combine(CombineOp::Shift, &[&d]);
        let dt = partial(&t, j);
        let part = verify_control(&source(&dt, 2), &shifted, &pts, 3).unwrap();
        prop_assert!(!full.pass || part.pass, "{t}");
    }
}

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use regulus::term::registry::standard_exp;
use regulus::term::evaluate_f64;
use regulus::{FunctionSystem, Scalar, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rational(rng: &mut ChaCha8Rng, num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(-num..=num)), BigInt::from(rng.gen_range(1..=den)))
}

pub fn nonzero_rational(rng: &mut ChaCha8Rng, num: i64, den: i64) -> BigRational {
    loop {
        let q = rational(rng, num, den);
        if !q.is_zero() {
            return q;
        }
    }
}

pub fn rational_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<Scalar> {
    (0..n).map(|_| Scalar::from(rational(rng, 4, 3))).collect()
}

pub fn float_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Polynomial in `n` variables of total degree at most `deg` with up to
/// four rational monomials.
pub fn random_poly(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> Term {
    let count = rng.gen_range(1..=4);
    let monomials = (0..count).map(|_| {
        let mut factors = vec![Term::constant(nonzero_rational(rng, 5, 3))];
        let total = rng.gen_range(0..=deg);
        for _ in 0..total {
            factors.push(Term::var(rng.gen_range(1..=n)));
        }
        Term::product(factors)
    });
    Term::sum(monomials)
}

pub fn random_poly_system(rng: &mut ChaCha8Rng) -> FunctionSystem {
    let n = rng.gen_range(1..=4);
    let p = rng.gen_range(1..=n);
    let fs = (0..p).map(|_| random_poly(rng, n, 3)).collect();
    FunctionSystem::new(n, fs).expect("arity within n")
}

/// Random term over polynomials and `exp`, never identically zero.
pub fn random_term(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Term {
    loop {
        let t = term_node(rng, n, depth);
        if !t.is_zero_term() && !t.is_constant() {
            return t;
        }
    }
}

fn term_node(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Term {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.75) {
            Term::var(rng.gen_range(1..=n))
        } else {
            Term::constant(nonzero_rational(rng, 3, 2))
        };
    }
    match rng.gen_range(0..4) {
        0 => Term::sum([term_node(rng, n, depth - 1), term_node(rng, n, depth - 1)]),
        1 => Term::product([term_node(rng, n, depth - 1), term_node(rng, n, depth - 1)]),
        2 => term_node(rng, n, depth - 1).pow(2),
        _ => {
            let inner = Term::product([Term::constant(rational(rng, 2, 2)), term_node(rng, n, depth - 1)]);
            Term::apply(standard_exp(), vec![inner])
        }
    }
}

/// `exp` applied to a term.
pub fn exp(t: Term) -> Term {
    Term::apply(standard_exp(), vec![t])
}

pub fn parse(src: &str) -> Term {
    regulus::parse(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

pub fn eval(t: &Term, x: &[f64]) -> f64 {
    evaluate_f64(t, x).expect("finite")
}

/// `|a − b| / max(|b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Nested central differences for `D^α g`.
pub fn central(g: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[u32], h: f64) -> f64 {
    match alpha.iter().position(|&k| k > 0) {
        None => g(x),
        Some(i) => {
            let mut rest = alpha.to_vec();
            rest[i] -= 1;
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (central(g, &xp, &rest, h) - central(g, &xm, &rest, h)) / (2.0 * h)
        }
    }
}

/// One Richardson step on [`central`], error `O(h⁴)`.
pub fn richardson(g: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: &[u32], h: f64) -> f64 {
    (4.0 * central(g, x, alpha, h / 2.0) - central(g, x, alpha, h)) / 3.0
}

/// Rank by fraction-based Gaussian elimination.
pub fn exact_rank(m: &[Vec<BigRational>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in 0..rows {
            if r != rank && !a[r][c].is_zero() {
                let f = &a[r][c] / &a[rank][c];
                for k in c..cols {
                    let v = &f * &a[rank][k];
                    a[r][k] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn to_exact(values: &[Vec<Scalar>]) -> Vec<Vec<BigRational>> {
    values
        .iter()
        .map(|r| r.iter().map(|v| v.to_exact().expect("exact entry")).collect())
        .collect()
}

pub fn is_positive(s: &Scalar) -> bool {
    match s.to_exact() {
        Some(q) => q.is_positive(),
        None => s.to_f64() > 0.0,
    }
}

/// Root of a sign-changing `g` on `[lo, hi]`.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Term whose value at `a` is zero: `t − t(a)` with `t(a)` rounded to a
/// rational.
pub fn vanishing_at(t: &Term, a: &[f64]) -> Term {
    let v = BigRational::from_float(eval(t, a)).expect("finite");
    t - &Term::constant(v)
}

/// Random term whose `exp` applications take a bare coordinate, the shape
/// covered by derivative-control propagation.
pub fn random_controlled_term(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Term {
    loop {
        let t = controlled_node(rng, n, depth);
        if !t.is_zero_term() {
            return t;
        }
    }
}

fn controlled_node(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Term {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..3) {
            0 => Term::constant(nonzero_rational(rng, 3, 2)),
            1 => exp(Term::var(rng.gen_range(1..=n))),
            _ => Term::var(rng.gen_range(1..=n)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Term::sum([controlled_node(rng, n, depth - 1), controlled_node(rng, n, depth - 1)]),
        1 => Term::product([controlled_node(rng, n, depth - 1), controlled_node(rng, n, depth - 1)]),
        _ => controlled_node(rng, n, depth - 1).pow(2),
    }
}

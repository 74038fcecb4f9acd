use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Kind, MultiIndex, Term};

/// `∂t/∂x_j`. Indices beyond the arity give the zero term.
///
/// Shared sub-DAGs are differentiated once per call.
pub fn partial(t: &Term, j: usize) -> Term {
    let mut memo = HashMap::new();
    partial_rec(t, j, &mut memo)
}

fn partial_rec(t: &Term, j: usize, memo: &mut HashMap<usize, Term>) -> Term {
    if !t.depends_on(j) {
        return Term::zero();
    }
    let shared = t.is_shared();
    if shared {
        if let Some(d) = memo.get(&t.node_id()) {
            return d.clone();
        }
    }
    let out = match t.kind() {
        Kind::Var(k) => {
            if *k == j {
                Term::one()
            } else {
                Term::zero()
            }
        }
        Kind::Const(_) => Term::zero(),
        Kind::Sum(_, ts) => Term::sum(ts.iter().map(|c| partial_rec(c, j, memo))),
        Kind::Product(c, fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                let df = partial_rec(f, j, memo);
                if df.is_zero_term() {
                    continue;
                }
                let rest = fs
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != i)
                    .map(|(_, g)| g.clone());
                terms.push(Term::product(
                    std::iter::once(Term::constant(c.clone()))
                        .chain(std::iter::once(df))
                        .chain(rest),
                ));
            }
            Term::sum(terms)
        }
        Kind::Pow(b, e) => {
            let db = partial_rec(b, j, memo);
            let k = Term::constant(BigRational::from_integer(BigInt::from(*e)));
            Term::product([k, b.pow(e - 1), db])
        }
        Kind::Apply(f, args) => {
            let mut terms = Vec::new();
            for (i, a) in args.iter().enumerate() {
                let da = partial_rec(a, j, memo);
                if da.is_zero_term() {
                    continue;
                }
                terms.push(&(f.partial)(t, args, i) * &da);
            }
            Term::sum(terms)
        }
    };
    if shared {
        memo.insert(t.node_id(), out.clone());
    }
    out
}

/// `D^α t`, applying unit steps in increasing variable order.
pub fn d_alpha(t: &Term, alpha: &MultiIndex) -> Term {
    let mut out = t.clone();
    for (i, &k) in alpha.as_slice().iter().enumerate() {
        for _ in 0..k {
            if out.is_zero_term() {
                return out;
            }
            out = partial(&out, i + 1);
        }
    }
    out
}

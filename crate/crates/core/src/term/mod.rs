//! Immutable expression DAG over coordinates `x1, x2, …`, rational
//! constants, ring operations and registered basic functions.
//!
//! Every constructor returns a term in a light canonical form: nested sums
//! and products are flattened, like terms and like factors are collected,
//! constants are folded and zero/one are collapsed. Polynomials are never
//! expanded, so two equal polynomials written differently may still differ
//! structurally. `is_zero_term` is therefore sound but incomplete.

mod diff;
mod eval;
mod multi_index;
mod parse;
pub mod registry;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock, Weak};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub use diff::{d_alpha, partial};
pub use eval::{evaluate, evaluate_f64, EvalError};
pub use multi_index::{multi_indices, multi_indices_of_order, MultiIndex};
pub use parse::{parse, parse_with, ParseError};
pub use registry::{Basic, BasicRegistry};

use crate::scalar::rational_to_f64;

#[derive(Clone)]
pub struct Term(Arc<Node>);

pub struct Node {
    kind: Kind,
    hash: u64,
    arity: usize,
    mask: u64,
    polynomial: bool,
    /// Float value of the constant, or of the rational coefficient of a
    /// sum or product.
    approx: f64,
}

/// Node shapes. Invariants maintained by the constructors:
/// `Sum(c, ts)` has at least one non-constant child and, if `c == 0`, at
/// least two; `Product(c, fs)` has `c != 0` and either `c != 1` or two or
/// more factors; `Pow(b, e)` has `e >= 2` and `b` is neither a constant
/// nor a product.
pub enum Kind {
    Var(usize),
    Const(BigRational),
    Sum(BigRational, Vec<Term>),
    Product(BigRational, Vec<Term>),
    Pow(Term, u32),
    Apply(Arc<Basic>, Vec<Term>),
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix(h: u64, v: u64) -> u64 {
    (h ^ v).wrapping_mul(FNV_PRIME).rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15
}

fn hash_bigint(h: u64, n: &BigInt) -> u64 {
    let mut h = mix(h, matches!(n.sign(), Sign::Minus) as u64);
    for d in n.to_u64_digits().1 {
        h = mix(h, d);
    }
    h
}

fn hash_rational(h: u64, q: &BigRational) -> u64 {
    hash_bigint(hash_bigint(h, q.numer()), q.denom())
}

fn hash_str(mut h: u64, s: &str) -> u64 {
    for b in s.bytes() {
        h = mix(h, b as u64);
    }
    h
}

impl Term {
    fn from_kind(kind: Kind) -> Term {
        let (hash, arity, mask, polynomial, approx) = match &kind {
            Kind::Var(j) => {
                let bit = if *j <= 63 { 1u64 << (j - 1) } else { 1u64 << 63 };
                (mix(1, *j as u64), *j, bit, true, 0.0)
            }
            Kind::Const(q) => (hash_rational(2, q), 0, 0, true, rational_to_f64(q)),
            Kind::Sum(c, ts) => {
                let mut h = hash_rational(3, c);
                for t in ts {
                    h = mix(h, t.0.hash);
                }
                let (a, m, p) = fold_children(ts);
                (h, a, m, p, rational_to_f64(c))
            }
            Kind::Product(c, fs) => {
                let mut h = hash_rational(4, c);
                for t in fs {
                    h = mix(h, t.0.hash);
                }
                let (a, m, p) = fold_children(fs);
                (h, a, m, p, rational_to_f64(c))
            }
            Kind::Pow(b, e) => (
                mix(mix(5, b.0.hash), *e as u64),
                b.0.arity,
                b.0.mask,
                b.0.polynomial,
                0.0,
            ),
            Kind::Apply(f, args) => {
                let mut h = hash_str(6, &f.name);
                for t in args {
                    h = mix(h, t.0.hash);
                }
                let (a, m, _) = fold_children(args);
                (h, a, m, false, 0.0)
            }
        };
        intern(Node {
            kind,
            hash,
            arity,
            mask,
            polynomial,
            approx,
        })
    }

    /// Coordinate `x_j`; indices start at 1.
    pub fn var(j: usize) -> Term {
        assert!(j >= 1, "variable indices start at 1");
        Term::from_kind(Kind::Var(j))
    }

    pub fn constant(q: BigRational) -> Term {
        Term::from_kind(Kind::Const(q))
    }

    pub fn int(v: i64) -> Term {
        Term::constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Term {
        Term::constant(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Term {
        Term::int(0)
    }

    pub fn one() -> Term {
        Term::int(1)
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Largest variable index appearing in the term (0 for constants).
    pub fn arity(&self) -> usize {
        self.0.arity
    }

    /// True when no registered basic occurs.
    pub fn is_polynomial(&self) -> bool {
        self.0.polynomial
    }

    /// Conservative: may return true for indices above 63 that do not occur.
    pub fn depends_on(&self, j: usize) -> bool {
        if j == 0 || j > self.0.arity {
            return false;
        }
        let bit = if j <= 63 { 1u64 << (j - 1) } else { 1u64 << 63 };
        self.0.mask & bit != 0
    }

    pub fn as_constant(&self) -> Option<&BigRational> {
        match &self.0.kind {
            Kind::Const(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.0.kind, Kind::Const(_))
    }

    pub(crate) fn approx(&self) -> f64 {
        self.0.approx
    }

    pub(crate) fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub(crate) fn is_shared(&self) -> bool {
        Arc::strong_count(&self.0) > 1
    }

    /// Sound, incomplete zero test on the canonical form.
    pub fn is_zero_term(&self) -> bool {
        matches!(&self.0.kind, Kind::Const(q) if q.is_zero())
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.node_id()) {
                continue;
            }
            stack.extend(t.children().iter().cloned());
        }
        seen.len()
    }

    /// Number of nodes in the printed tree, saturating at `u64::MAX`.
    pub fn tree_size(&self) -> u64 {
        fn go(t: &Term, memo: &mut HashMap<usize, u64>) -> u64 {
            if let Some(&s) = memo.get(&t.node_id()) {
                return s;
            }
            let s = t.children().iter().fold(1u64, |acc, c| acc.saturating_add(go(c, memo)));
            memo.insert(t.node_id(), s);
            s
        }
        go(self, &mut HashMap::new())
    }

    pub fn children(&self) -> &[Term] {
        match &self.0.kind {
            Kind::Sum(_, ts) | Kind::Product(_, ts) | Kind::Apply(_, ts) => ts,
            Kind::Pow(b, _) => std::slice::from_ref(b),
            _ => &[],
        }
    }

    pub fn sum<I: IntoIterator<Item = Term>>(terms: I) -> Term {
        let mut constant = BigRational::zero();
        let mut parts: Vec<(BigRational, Vec<Term>)> = Vec::new();
        let push = |t: &Term, parts: &mut Vec<(BigRational, Vec<Term>)>| match &t.0.kind {
            Kind::Product(c, fs) => parts.push((c.clone(), fs.clone())),
            _ => parts.push((BigRational::one(), vec![t.clone()])),
        };
        for t in terms {
            match &t.0.kind {
                Kind::Const(c) => constant += c,
                Kind::Sum(c, ts) => {
                    constant += c;
                    for child in ts {
                        push(child, &mut parts);
                    }
                }
                _ => push(&t, &mut parts),
            }
        }
        parts.sort_by(|a, b| cmp_slices(&a.1, &b.1));
        let mut merged: Vec<(BigRational, Vec<Term>)> = Vec::with_capacity(parts.len());
        for (c, fs) in parts {
            match merged.last_mut() {
                Some(last) if slices_eq(&last.1, &fs) => last.0 += c,
                _ => merged.push((c, fs)),
            }
        }
        let mut children: Vec<Term> = merged
            .into_iter()
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, fs)| product_raw(c, fs))
            .collect();
        children.sort_by(canonical_cmp);
        match children.len() {
            0 => Term::constant(constant),
            1 if constant.is_zero() => children.pop().unwrap(),
            _ => Term::from_kind(Kind::Sum(constant, children)),
        }
    }

    pub fn product<I: IntoIterator<Item = Term>>(terms: I) -> Term {
        let mut coef = BigRational::one();
        let mut factors: Vec<(Term, u32)> = Vec::new();
        let push = |t: &Term, factors: &mut Vec<(Term, u32)>| match &t.0.kind {
            Kind::Pow(b, e) => factors.push((b.clone(), *e)),
            _ => factors.push((t.clone(), 1)),
        };
        for t in terms {
            match &t.0.kind {
                Kind::Const(c) => coef *= c,
                Kind::Product(c, fs) => {
                    coef *= c;
                    for f in fs {
                        push(f, &mut factors);
                    }
                }
                _ => push(&t, &mut factors),
            }
        }
        if coef.is_zero() {
            return Term::zero();
        }
        factors.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
        let mut merged: Vec<(Term, u32)> = Vec::with_capacity(factors.len());
        for (b, e) in factors {
            match merged.last_mut() {
                Some(last) if last.0 == b => last.1 += e,
                _ => merged.push((b, e)),
            }
        }
        let mut fs: Vec<Term> = merged
            .into_iter()
            .map(|(b, e)| if e == 1 { b } else { Term::from_kind(Kind::Pow(b, e)) })
            .collect();
        fs.sort_by(canonical_cmp);
        product_raw(coef, fs)
    }

    pub fn pow(&self, e: u32) -> Term {
        match (&self.0.kind, e) {
            (_, 0) => Term::one(),
            (_, 1) => self.clone(),
            (Kind::Const(q), _) => Term::constant(num_traits::pow(q.clone(), e as usize)),
            (Kind::Pow(b, k), _) => b.pow(k * e),
            (Kind::Product(c, fs), _) => {
                let coef = Term::constant(num_traits::pow(c.clone(), e as usize));
                Term::product(std::iter::once(coef).chain(fs.iter().map(|f| f.pow(e))))
            }
            _ => Term::from_kind(Kind::Pow(self.clone(), e)),
        }
    }

    /// Applies a registered basic. Constant arguments are folded when the
    /// basic has an exact rule for them.
    pub fn apply(basic: Arc<Basic>, args: Vec<Term>) -> Term {
        assert_eq!(
            args.len(),
            basic.arity,
            "`{}` takes {} argument(s)",
            basic.name,
            basic.arity
        );
        if let Some(exact) = basic.exact {
            let consts: Option<Vec<BigRational>> =
                args.iter().map(|a| a.as_constant().cloned()).collect();
            if let Some(value) = consts.and_then(|c| exact(&c)) {
                return Term::constant(value);
            }
        }
        Term::from_kind(Kind::Apply(basic, args))
    }

    pub fn scale(&self, q: &BigRational) -> Term {
        Term::product([Term::constant(q.clone()), self.clone()])
    }

    pub fn square(&self) -> Term {
        self.pow(2)
    }

    /// Substitutes `x_j ↦ replacement[j-1]`; indices beyond the slice are kept.
    pub fn substitute(&self, replacement: &[Term]) -> Term {
        let mut memo = std::collections::HashMap::new();
        substitute_rec(self, replacement, &mut memo)
    }
}

fn substitute_rec(
    t: &Term,
    rep: &[Term],
    memo: &mut std::collections::HashMap<usize, Term>,
) -> Term {
    if let Some(done) = memo.get(&t.node_id()) {
        return done.clone();
    }
    let out = match &t.0.kind {
        Kind::Var(j) => rep.get(j - 1).cloned().unwrap_or_else(|| t.clone()),
        Kind::Const(_) => t.clone(),
        Kind::Sum(c, ts) => Term::sum(
            std::iter::once(Term::constant(c.clone()))
                .chain(ts.iter().map(|x| substitute_rec(x, rep, memo))),
        ),
        Kind::Product(c, fs) => Term::product(
            std::iter::once(Term::constant(c.clone()))
                .chain(fs.iter().map(|x| substitute_rec(x, rep, memo))),
        ),
        Kind::Pow(b, e) => substitute_rec(b, rep, memo).pow(*e),
        Kind::Apply(f, args) => Term::apply(
            f.clone(),
            args.iter().map(|x| substitute_rec(x, rep, memo)).collect(),
        ),
    };
    memo.insert(t.node_id(), out.clone());
    out
}

fn fold_children(ts: &[Term]) -> (usize, u64, bool) {
    ts.iter().fold((0, 0, true), |(a, m, p), t| {
        (a.max(t.0.arity), m | t.0.mask, p && t.0.polynomial)
    })
}

fn product_raw(coef: BigRational, mut fs: Vec<Term>) -> Term {
    if fs.is_empty() {
        return Term::constant(coef);
    }
    if coef.is_one() && fs.len() == 1 {
        return fs.pop().unwrap();
    }
    Term::from_kind(Kind::Product(coef, fs))
}

fn rank(k: &Kind) -> u8 {
    match k {
        Kind::Var(_) => 0,
        Kind::Apply(..) => 1,
        Kind::Pow(..) => 2,
        Kind::Product(..) => 3,
        Kind::Sum(..) => 4,
        Kind::Const(_) => 5,
    }
}

fn cmp_slices(a: &[Term], b: &[Term]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match canonical_cmp(x, y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn slices_eq(a: &[Term], b: &[Term]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

/// One-level equality of node shapes whose children are already interned.
fn shallow_eq(a: &Kind, b: &Kind) -> bool {
    match (a, b) {
        (Kind::Var(i), Kind::Var(j)) => i == j,
        (Kind::Const(p), Kind::Const(q)) => p == q,
        (Kind::Sum(c1, x), Kind::Sum(c2, y)) | (Kind::Product(c1, x), Kind::Product(c2, y)) => {
            std::mem::discriminant(a) == std::mem::discriminant(b) && c1 == c2 && slices_eq(x, y)
        }
        (Kind::Pow(b1, e1), Kind::Pow(b2, e2)) => e1 == e2 && b1 == b2,
        (Kind::Apply(f, x), Kind::Apply(g, y)) => f.name == g.name && slices_eq(x, y),
        _ => false,
    }
}

struct Interner {
    table: HashMap<u64, Vec<Weak<Node>>>,
    /// Live-entry estimate at the last sweep.
    swept_at: usize,
    inserted: usize,
}

static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();

/// Returns the canonical node equal to `node`, creating it if needed.
fn intern(node: Node) -> Term {
    let lock = INTERNER.get_or_init(|| {
        Mutex::new(Interner {
            table: HashMap::new(),
            swept_at: 0,
            inserted: 0,
        })
    });
    let mut guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    let int = &mut *guard;
    let bucket = int.table.entry(node.hash).or_default();
    bucket.retain(|w| w.strong_count() > 0);
    for w in bucket.iter() {
        if let Some(existing) = w.upgrade() {
            if shallow_eq(&existing.kind, &node.kind) {
                return Term(existing);
            }
        }
    }
    let arc = Arc::new(node);
    bucket.push(Arc::downgrade(&arc));
    int.inserted += 1;
    if int.inserted > 2 * int.swept_at.max(1 << 16) {
        int.table.retain(|_, b| {
            b.retain(|w| w.strong_count() > 0);
            !b.is_empty()
        });
        int.swept_at = int.table.len();
        int.inserted = 0;
    }
    Term(arc)
}

/// Total order used to sort children. Consistent with `==`.
pub fn canonical_cmp(a: &Term, b: &Term) -> Ordering {
    if Arc::ptr_eq(&a.0, &b.0) {
        return Ordering::Equal;
    }
    let r = rank(&a.0.kind).cmp(&rank(&b.0.kind));
    if r != Ordering::Equal {
        return r;
    }
    match (&a.0.kind, &b.0.kind) {
        (Kind::Var(i), Kind::Var(j)) => i.cmp(j),
        (Kind::Const(p), Kind::Const(q)) => p.cmp(q),
        (Kind::Pow(b1, e1), Kind::Pow(b2, e2)) => canonical_cmp(b1, b2).then(e1.cmp(e2)),
        (Kind::Apply(f, xs), Kind::Apply(g, ys)) => {
            f.name.cmp(&g.name).then_with(|| cmp_slices(xs, ys))
        }
        (Kind::Product(c1, fs1), Kind::Product(c2, fs2)) => {
            cmp_slices(fs1, fs2).then_with(|| c1.cmp(c2))
        }
        (Kind::Sum(c1, ts1), Kind::Sum(c2, ts2)) => {
            if a.0.hash != b.0.hash {
                return a.0.hash.cmp(&b.0.hash);
            }
            c1.cmp(c2).then_with(|| cmp_slices(ts1, ts2))
        }
        _ => unreachable!("ranks matched"),
    }
}

/// Nodes are interned, so structural equality is pointer identity.
impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_cmp(self, other)
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, q: &BigRational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "(/ {} {})", q.numer(), q.denom())
    }
}

/// Prints in the s-expression grammar accepted by [`parse`].
/// Serialized as its printed form.
impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            Kind::Var(j) => write!(f, "x{j}"),
            Kind::Const(q) => write_rational(f, q),
            Kind::Sum(c, ts) => {
                write!(f, "(+")?;
                for t in ts {
                    write!(f, " {t}")?;
                }
                if !c.is_zero() {
                    write!(f, " ")?;
                    write_rational(f, c)?;
                }
                write!(f, ")")
            }
            Kind::Product(c, fs) => {
                write!(f, "(*")?;
                if !c.is_one() {
                    write!(f, " ")?;
                    write_rational(f, c)?;
                }
                for t in fs {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
            Kind::Pow(b, e) => write!(f, "(^ {b} {e})"),
            Kind::Apply(g, args) => {
                write!(f, "({}", g.name)?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Term({self})")
    }
}

impl Add<&Term> for &Term {
    type Output = Term;
    fn add(self, rhs: &Term) -> Term {
        Term::sum([self.clone(), rhs.clone()])
    }
}

impl Sub<&Term> for &Term {
    type Output = Term;
    fn sub(self, rhs: &Term) -> Term {
        Term::sum([self.clone(), -rhs])
    }
}

impl Mul<&Term> for &Term {
    type Output = Term;
    fn mul(self, rhs: &Term) -> Term {
        Term::product([self.clone(), rhs.clone()])
    }
}

impl Neg for &Term {
    type Output = Term;
    fn neg(self) -> Term {
        Term::product([Term::int(-1), self.clone()])
    }
}

impl Neg for Term {
    type Output = Term;
    fn neg(self) -> Term {
        -&self
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Term> for Term {
            type Output = Term;
            fn $m(self, rhs: Term) -> Term {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Term> for Term {
            type Output = Term;
            fn $m(self, rhs: &Term) -> Term {
                (&self).$m(rhs)
            }
        }
        impl $tr<Term> for &Term {
            type Output = Term;
            fn $m(self, rhs: Term) -> Term {
                self.$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

/// Sign of a rational constant term, if the term is constant.
pub fn constant_sign(t: &Term) -> Option<i8> {
    t.as_constant().map(|q| {
        if q.is_zero() {
            0
        } else if q.is_positive() {
            1
        } else {
            -1
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(j: usize) -> Term {
        Term::var(j)
    }

    #[test]
    fn add_zero_is_identity() {
        assert_eq!(x(1) + Term::zero(), x(1));
    }

    #[test]
    fn cancellation() {
        assert!((x(1) - x(1)).is_zero_term());
        assert!((x(1) * x(2) - x(2) * x(1)).is_zero_term());
        let t = (x(1) + x(2)).pow(2);
        assert!((t.clone() - t).is_zero_term());
    }

    #[test]
    fn like_terms_and_factors() {
        assert_eq!((x(1) + x(1)).to_string(), "(* 2 x1)");
        assert_eq!((x(1) * x(1)).to_string(), "(^ x1 2)");
        assert_eq!((x(1) * x(1).pow(2)).to_string(), "(^ x1 3)");
    }

    #[test]
    fn pow_distributes_over_products() {
        let e = Term::apply(registry::standard_exp(), vec![x(1)]);
        let t = (-&e).pow(2) + Term::one();
        assert_eq!(t.to_string(), "(+ (^ (exp x1) 2) 1)");
    }

    #[test]
    fn exp_of_zero_folds() {
        let e = Term::apply(registry::standard_exp(), vec![Term::zero()]);
        assert_eq!(e, Term::one());
    }

    #[test]
    fn arity_is_max_index() {
        assert_eq!((x(1) * x(4) + Term::int(3)).arity(), 4);
        assert_eq!(Term::int(3).arity(), 0);
        assert!((x(2) * x(3)).depends_on(3));
        assert!(!(x(2) * x(3)).depends_on(1));
    }

    #[test]
    fn substitute_embeds() {
        let t = x(1) * x(2);
        let s = t.substitute(&[x(3), Term::int(2)]);
        assert_eq!(s.to_string(), "(* 2 x3)");
    }
}

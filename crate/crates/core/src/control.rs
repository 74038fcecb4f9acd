//! Controlled derivatives: certificates `|D^α f(x)| ≤ C_{|α|}·ω(x)^{E_{|α|}}`
//! with `ω ≥ 1`, their propagation through sums, products and partial
//! derivatives, the bound for implicitly defined chart functions, and
//! sampling-based verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chart::{Chart, ChartError};
use crate::jet::taylor;
use crate::term::{evaluate_f64, EvalError, Kind, MultiIndex, Term};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("`{0}` is not a registered basic")]
    UnknownBasic(String),
    #[error("`{0}` has no control template")]
    NoTemplate(String),
    #[error("no control rule for `{0}` (basics must be applied to coordinates)")]
    Unsupported(String),
    #[error("certificate covers orders ≤ {have}, {want} requested")]
    OrderTooHigh { have: usize, want: usize },
    #[error("Δ vanishes at {0:?}")]
    DeltaFloor(Vec<f64>),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlData {
    pub omega: Term,
    pub c: Vec<f64>,
    pub e: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineOp {
    Sum,
    Product,
    Shift,
}

impl ControlData {
    pub fn new(omega: Term, c: Vec<f64>, e: Vec<u32>) -> Self {
        assert_eq!(c.len(), e.len());
        ControlData { omega, c, e }
    }

    /// Highest order covered.
    pub fn max_order(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    /// `ω = 1`, `C_0 = |c|`, higher orders zero.
    pub fn constant(c: f64, max_order: usize) -> Self {
        let mut cs = vec![0.0; max_order + 1];
        cs[0] = c.abs();
        ControlData::new(Term::one(), cs, vec![0; max_order + 1])
    }

    /// Data for `x_i` in dimension `n`: `ω = 1 + Σ x_j²`.
    pub fn coordinate(n: usize, max_order: usize) -> Self {
        let omega = Term::sum(
            std::iter::once(Term::one()).chain((1..=n).map(|j| Term::var(j).square())),
        );
        let c = (0..=max_order).map(|k| if k <= 1 { 1.0 } else { 0.0 }).collect();
        ControlData::new(omega, c, vec![1; max_order + 1])
    }

    pub fn scaled(&self, s: f64) -> Self {
        ControlData::new(
            self.omega.clone(),
            self.c.iter().map(|c| c * s.abs()).collect(),
            self.e.clone(),
        )
    }

    /// Pointwise maximum of the sequences with `ω` summed; certifies each
    /// input function.
    pub fn cover(items: &[ControlData]) -> Self {
        let len = items.iter().map(|d| d.c.len()).min().unwrap_or(1);
        let omega = Term::sum(items.iter().map(|d| d.omega.clone()));
        let c = (0..len)
            .map(|k| items.iter().fold(0.0f64, |m, d| m.max(d.c[k])))
            .collect();
        let e = (0..len)
            .map(|k| items.iter().map(|d| d.e[k]).max().unwrap_or(0))
            .collect();
        ControlData::new(omega, c, e)
    }
}

fn prefix_max_f(v: &[f64], k: usize) -> f64 {
    v[..=k].iter().fold(0.0f64, |m, x| m.max(*x))
}

fn prefix_max_u(v: &[u32], k: usize) -> u32 {
    v[..=k].iter().copied().max().unwrap_or(0)
}

/// Sum and product take two inputs; shift takes one.
pub fn combine(op: CombineOp, inputs: &[&ControlData]) -> ControlData {
    match op {
        CombineOp::Sum => {
            let (a, b) = (inputs[0], inputs[1]);
            let len = a.c.len().min(b.c.len());
            ControlData::new(
                &a.omega + &b.omega,
                (0..len).map(|k| a.c[k] + b.c[k]).collect(),
                (0..len).map(|k| a.e[k].max(b.e[k])).collect(),
            )
        }
        CombineOp::Product => {
            let (a, b) = (inputs[0], inputs[1]);
            let len = a.c.len().min(b.c.len());
            ControlData::new(
                &a.omega + &b.omega,
                (0..len)
                    .map(|k| 2f64.powi(k as i32) * prefix_max_f(&a.c, k) * prefix_max_f(&b.c, k))
                    .collect(),
                (0..len)
                    .map(|k| prefix_max_u(&a.e, k) + prefix_max_u(&b.e, k))
                    .collect(),
            )
        }
        CombineOp::Shift => {
            let a = inputs[0];
            ControlData::new(a.omega.clone(), a.c[1..].to_vec(), a.e[1..].to_vec())
        }
    }
}

/// Registry template for a basic applied to `x_1, …, x_arity`.
pub fn basic_control(name: &str, max_order: usize) -> Result<ControlData, ControlError> {
    let registry = crate::term::BasicRegistry::standard();
    let basic = registry
        .get(name)
        .ok_or_else(|| ControlError::UnknownBasic(name.to_string()))?;
    let rule = basic
        .control
        .ok_or_else(|| ControlError::NoTemplate(name.to_string()))?;
    let args: Vec<Term> = (1..=basic.arity).map(Term::var).collect();
    Ok(rule(&args, max_order))
}

/// Certificate for `t` in dimension `n` built from the term structure.
/// Supports sums and products of constants, coordinates, and basics whose
/// arguments are coordinates.
pub fn control_for_term(t: &Term, n: usize, max_order: usize) -> Result<ControlData, ControlError> {
    Ok(match t.kind() {
        Kind::Const(_) => ControlData::constant(t.approx(), max_order),
        Kind::Var(_) => ControlData::coordinate(n, max_order),
        Kind::Sum(_, ts) => {
            let mut acc = ControlData::constant(t.approx(), max_order);
            for c in ts {
                let d = control_for_term(c, n, max_order)?;
                acc = combine(CombineOp::Sum, &[&acc, &d]);
            }
            acc
        }
        Kind::Product(_, fs) => {
            let mut acc = control_for_term(&fs[0], n, max_order)?;
            for f in &fs[1..] {
                let d = control_for_term(f, n, max_order)?;
                acc = combine(CombineOp::Product, &[&acc, &d]);
            }
            acc.scaled(t.approx())
        }
        Kind::Pow(b, e) => {
            let base = control_for_term(b, n, max_order)?;
            let mut acc = base.clone();
            for _ in 1..*e {
                acc = combine(CombineOp::Product, &[&acc, &base]);
            }
            acc
        }
        Kind::Apply(f, args) => {
            if !args.iter().all(|a| matches!(a.kind(), Kind::Var(_))) {
                return Err(ControlError::Unsupported(t.to_string()));
            }
            let rule = f
                .control
                .ok_or_else(|| ControlError::NoTemplate(f.name.clone()))?;
            rule(args, max_order)
        }
    })
}

/// Certificate for the solved coordinates of a chart, in the free
/// variables. `ρ(y) = (1 + ω̂)(1 + Δ̂⁻²)` with `ω̂ = ω + 1 + Σ x_j²`
/// evaluated at `(y, φ(y))`.
#[derive(Clone, Debug)]
pub struct ImplicitControl {
    pub chart: Chart,
    pub omega: Term,
    pub delta: Term,
    pub c: Vec<f64>,
    pub e: Vec<u32>,
}

/// `S(k, j)`: number of partitions of a `k`-set into `j` blocks, by
/// enumerating restricted growth strings.
pub fn set_partition_counts(k: usize) -> Vec<u64> {
    let mut counts = vec![0u64; k + 1];
    fn rec(pos: usize, k: usize, blocks: usize, counts: &mut [u64]) {
        if pos == k {
            counts[blocks] += 1;
            return;
        }
        for b in 0..=blocks {
            rec(pos + 1, k, blocks.max(b + 1), counts);
        }
    }
    if k == 0 {
        counts[0] = 1;
    } else {
        rec(0, k, 0, &mut counts);
    }
    counts
}

/// Number of chain-rule monomials in `D^α g(y, φ(y))` at order `k ≥ 1`
/// that do not contain a top-order derivative of `φ`: every set partition
/// of the `k` steps with each block routed through one of `vars` variables,
/// minus the `solved` single-block terms.
pub fn chain_rule_terms(k: usize, vars: usize, solved: usize) -> f64 {
    let counts = set_partition_counts(k);
    let total: f64 = counts
        .iter()
        .enumerate()
        .map(|(j, &s)| s as f64 * (vars as f64).powi(j as i32))
        .sum();
    total - solved as f64
}

/// Bound for the solved coordinates of `chart` given a certificate `cd`
/// valid for every equation of the chart.
///
/// Differentiating `g(y, φ(y)) = 0` gives `J_s·D^α φ = −R` where `R` is a
/// sum of `chain_rule_terms` products of one derivative of `g` and lower
/// order derivatives of coordinates. Cramer's rule divides by `Δ` and
/// multiplies by an adjugate of size `s − 1`, which gives
/// `C'_k = s!·C_1^{s−1}·T_k·C_{≤k}·C'_{<k}^k` and
/// `E'_k = (s−1)·E_1 + 1 + E_{≤k} + k·E'_{<k}`, with every constant
/// floored at 1 and `C'_0 = E'_0 = 1`.
pub fn implicit_control(
    chart: &Chart,
    cd: &ControlData,
    max_order: usize,
) -> Result<ImplicitControl, ControlError> {
    if cd.max_order() < max_order {
        return Err(ControlError::OrderTooHigh {
            have: cd.max_order(),
            want: max_order,
        });
    }
    let n = chart.system().dim();
    let s = chart.solved().len();
    let omega = Term::sum(
        [cd.omega.clone(), Term::one()]
            .into_iter()
            .chain((1..=n).map(|j| Term::var(j).square())),
    );
    let delta = chart.delta()?;
    let fact: f64 = (1..=s).map(|i| i as f64).product();
    let c1 = cd.c.get(1).copied().unwrap_or(0.0).max(1.0);
    let e1 = cd.e.get(1).copied().unwrap_or(0);
    let mut c = vec![1.0];
    let mut e = vec![1u32];
    for k in 1..=max_order {
        let prev_c = c.iter().fold(1.0f64, |m, v| m.max(*v));
        let prev_e = *e.iter().max().unwrap();
        let in_c = prefix_max_f(&cd.c, k).max(1.0);
        let in_e = prefix_max_u(&cd.e, k);
        let terms = chain_rule_terms(k, n, s);
        c.push(fact * c1.powi(s as i32 - 1) * terms * in_c * prev_c.powi(k as i32));
        e.push((s as u32).saturating_sub(1) * e1 + 1 + in_e + k as u32 * prev_e);
    }
    Ok(ImplicitControl {
        chart: chart.clone(),
        omega,
        delta,
        c,
        e,
    })
}

/// A control function together with its coefficient and exponent sequences.
pub trait Bound {
    fn omega_at(&self, x: &[f64]) -> Result<f64, ControlError>;
    fn coeff(&self, k: usize) -> f64;
    fn exponent(&self, k: usize) -> u32;
    fn max_order(&self) -> usize;
}

impl Bound for ControlData {
    fn omega_at(&self, x: &[f64]) -> Result<f64, ControlError> {
        Ok(evaluate_f64(&self.omega, x)?)
    }
    fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }
    fn exponent(&self, k: usize) -> u32 {
        self.e[k]
    }
    fn max_order(&self) -> usize {
        ControlData::max_order(self)
    }
}

impl Bound for ImplicitControl {
    fn omega_at(&self, y: &[f64]) -> Result<f64, ControlError> {
        let x = self.chart.point(y)?;
        let w = evaluate_f64(&self.omega, &x)?;
        let d = evaluate_f64(&self.delta, &x)?;
        if d == 0.0 {
            return Err(ControlError::DeltaFloor(y.to_vec()));
        }
        Ok((1.0 + w) * (1.0 + 1.0 / (d * d)))
    }
    fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }
    fn exponent(&self, k: usize) -> u32 {
        self.e[k]
    }
    fn max_order(&self) -> usize {
        self.c.len() - 1
    }
}

/// Something whose derivatives can be sampled.
pub trait DerivativeSource {
    /// Number of variables of a sample point.
    fn dim(&self) -> usize;
    /// `(α, D^α)` for all `|α| ≤ order`.
    fn derivatives(&self, x: &[f64], order: u32) -> Result<Vec<(MultiIndex, f64)>, ControlError>;
}

pub struct TermSource {
    pub term: Term,
    pub dim: usize,
}

impl DerivativeSource for TermSource {
    fn dim(&self) -> usize {
        self.dim
    }
    fn derivatives(&self, x: &[f64], order: u32) -> Result<Vec<(MultiIndex, f64)>, ControlError> {
        Ok(taylor(&self.term, x, order)?.derivatives())
    }
}

/// The `k`-th solved coordinate of a chart as a function of the free ones.
pub struct ChartSource<'a> {
    pub chart: &'a Chart,
    pub solved_index: usize,
}

impl DerivativeSource for ChartSource<'_> {
    fn dim(&self) -> usize {
        self.chart.free().len()
    }
    fn derivatives(&self, y: &[f64], order: u32) -> Result<Vec<(MultiIndex, f64)>, ControlError> {
        let col = self.chart.solved()[self.solved_index];
        Ok(self.chart.jets(y, order)?[col].derivatives())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlReport {
    pub pass: bool,
    pub samples: usize,
    pub order: usize,
    pub max_ratio: f64,
    pub worst_point: Vec<f64>,
    pub worst_alpha: MultiIndex,
    /// Largest ratio at each order `0..=order`.
    pub per_order: Vec<f64>,
}

/// `|d| / (C·ω^E)` computed in log space; zero bounds give 0 for an exact
/// zero derivative and infinity otherwise.
fn ratio(d: f64, c: f64, omega: f64, e: u32) -> f64 {
    let d = d.abs();
    if d == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return f64::INFINITY;
    }
    (d.ln() - c.ln() - e as f64 * omega.ln()).exp()
}

/// Checks the certificate at every point and every order `≤ order`.
pub fn verify_control(
    f: &dyn DerivativeSource,
    bound: &dyn Bound,
    points: &[Vec<f64>],
    order: usize,
) -> Result<ControlReport, ControlError> {
    if order > bound.max_order() {
        return Err(ControlError::OrderTooHigh {
            have: bound.max_order(),
            want: order,
        });
    }
    let mut per_order = vec![0.0f64; order + 1];
    let mut worst = (0.0f64, Vec::new(), MultiIndex::zero(f.dim()));
    for x in points {
        let omega = bound.omega_at(x)?;
        for (alpha, d) in f.derivatives(x, order as u32)? {
            let k = alpha.order() as usize;
            let r = ratio(d, bound.coeff(k), omega, bound.exponent(k));
            if r > per_order[k] {
                per_order[k] = r;
            }
            if r > worst.0 || worst.1.is_empty() {
                worst = (r.max(worst.0), x.clone(), alpha);
            }
        }
    }
    Ok(ControlReport {
        pass: worst.0 <= 1.0,
        samples: points.len(),
        order,
        max_ratio: worst.0,
        worst_point: worst.1,
        worst_alpha: worst.2,
        per_order,
    })
}

/// `count` uniform points in the box, from a seeded ChaCha8 stream.
pub fn sample_box(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobian::FunctionSystem;
    use crate::term::parse;

    #[test]
    fn exp_template() {
        let d = basic_control("exp", 4).unwrap();
        assert_eq!(d.omega, parse("(+ (exp x1) 1)").unwrap());
        assert_eq!(d.c, vec![1.0; 5]);
        assert_eq!(d.e, vec![1; 5]);
        let pts = sample_box(&[(-3.0, 3.0)], 100, 1);
        let src = TermSource {
            term: parse("(exp x1)").unwrap(),
            dim: 1,
        };
        assert!(verify_control(&src, &d, &pts, 4).unwrap().pass);
        let halved = ControlData::new(d.omega.clone(), vec![0.5, 1.0, 1.0, 1.0, 1.0], d.e.clone());
        let report = verify_control(&src, &halved, &pts, 4).unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst_alpha.order(), 0);
        assert!(matches!(basic_control("sin", 4), Err(ControlError::UnknownBasic(_))));
    }

    #[test]
    fn combine_rules() {
        let a = ControlData::constant(2.0, 3);
        let b = ControlData::constant(-5.0, 3);
        assert_eq!(combine(CombineOp::Sum, &[&a, &b]).c[0], 7.0);
        let e = basic_control("exp", 4).unwrap();
        let s = combine(CombineOp::Shift, &[&e]);
        assert_eq!(s.c, vec![1.0; 4]);
        assert_eq!(s.omega, e.omega);
    }

    #[test]
    fn product_certificate_verifies() {
        let t = parse("(* x1 (exp x1))").unwrap();
        let d = control_for_term(&t, 1, 4).unwrap();
        let pts = sample_box(&[(-3.0, 3.0)], 100, 7);
        let report = verify_control(&TermSource { term: t, dim: 1 }, &d, &pts, 4).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn zero_function() {
        let d = ControlData::new(Term::one(), vec![0.0; 3], vec![0; 3]);
        let src = TermSource {
            term: Term::zero(),
            dim: 2,
        };
        let pts = sample_box(&[(-1.0, 1.0), (-1.0, 1.0)], 10, 3);
        assert!(verify_control(&src, &d, &pts, 2).unwrap().pass);
    }

    #[test]
    fn partition_counts_are_stirling_numbers() {
        assert_eq!(set_partition_counts(4), vec![0, 1, 7, 6, 1]);
        assert_eq!(set_partition_counts(0), vec![1]);
    }

    #[test]
    fn implicit_exponential_graph() {
        let g = parse("(- x2 (exp x1))").unwrap();
        let sys = FunctionSystem::new(2, vec![g.clone()]).unwrap();
        let chart = Chart::new(sys, vec![0], vec![1], vec![0.0, 1.0]).unwrap();
        let cd = control_for_term(&g, 2, 4).unwrap();
        let ic = implicit_control(&chart, &cd, 4).unwrap();
        let pts = sample_box(&[(-3.0, 3.0)], 100, 11);
        let src = ChartSource {
            chart: &chart,
            solved_index: 0,
        };
        assert!(verify_control(&src, &ic, &pts, 4).unwrap().pass);
    }

    #[test]
    fn unsupported_composition() {
        let t = parse("(exp (* 2 x1))").unwrap();
        assert!(matches!(control_for_term(&t, 1, 2), Err(ControlError::Unsupported(_))));
    }
}

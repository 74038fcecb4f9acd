//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a function of `r` local
//! variables up to a fixed total order. Evaluating a [`Term`] on jets gives
//! every derivative `D^α t(a)` with `|α| ≤ K` in one pass, without building
//! the symbolic derivatives.

use std::collections::HashMap;
use std::sync::Arc;

use crate::term::{d_alpha, evaluate_f64, multi_indices, EvalError, Kind, MultiIndex, Term};

#[derive(Debug)]
pub struct JetSpace {
    vars: usize,
    order: u32,
    monomials: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    products: Vec<(usize, usize, usize)>,
}

impl JetSpace {
    pub fn new(vars: usize, order: u32) -> Arc<JetSpace> {
        let monomials = multi_indices(vars, order);
        let index: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.order() + b.order() > order {
                    continue;
                }
                let sum = MultiIndex::new(
                    a.as_slice()
                        .iter()
                        .zip(b.as_slice())
                        .map(|(x, y)| x + y)
                        .collect(),
                );
                products.push((i, j, index[&sum]));
            }
        }
        Arc::new(JetSpace {
            vars,
            order,
            monomials,
            index,
            products,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Option<usize> {
        self.index.get(alpha).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Jet {
        let mut coeffs = vec![0.0; space.monomials.len()];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// `base + t_i`, the i-th local coordinate shifted to `base`.
    pub fn variable(space: &Arc<JetSpace>, base: f64, i: usize) -> Jet {
        let mut j = Jet::constant(space, base);
        if space.order >= 1 {
            let idx = space.index[&MultiIndex::unit(space.vars, i)];
            j.coeffs[idx] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// `D^α` at the expansion point.
    pub fn derivative(&self, alpha: &MultiIndex) -> f64 {
        match self.space.index_of(alpha) {
            Some(i) => self.coeffs[i] * alpha.factorial(),
            None => 0.0,
        }
    }

    /// All `(α, D^α)` pairs in graded order.
    pub fn derivatives(&self) -> Vec<(MultiIndex, f64)> {
        self.space
            .monomials
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| (m.clone(), c * m.factorial()))
            .collect()
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += c;
        j
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            coeffs[k] += a * other.coeffs[j];
        }
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn powi(&self, e: u32) -> Jet {
        let mut result = Jet::constant(&self.space, 1.0);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Evaluates `t` with `x_j ↦ inputs[j-1]`.
pub fn evaluate_jet(t: &Term, inputs: &[Jet]) -> Result<Jet, EvalError> {
    if inputs.len() < t.arity() {
        return Err(EvalError::PointTooShort {
            needed: t.arity(),
            got: inputs.len(),
        });
    }
    let space = match inputs.first() {
        Some(j) => j.space.clone(),
        None => JetSpace::new(0, 0),
    };
    let mut memo = HashMap::new();
    eval_rec(t, inputs, &space, &mut memo)
}

/// Taylor expansion of `t` at `point` in all of its variables.
pub fn taylor(t: &Term, point: &[f64], order: u32) -> Result<Jet, EvalError> {
    let space = JetSpace::new(point.len(), order);
    let inputs: Vec<Jet> = point
        .iter()
        .enumerate()
        .map(|(i, &a)| Jet::variable(&space, a, i))
        .collect();
    if inputs.is_empty() {
        let v = evaluate_f64(t, &[])?;
        return Ok(Jet::constant(&space, v));
    }
    evaluate_jet(t, &inputs)
}

fn eval_rec(
    t: &Term,
    inputs: &[Jet],
    space: &Arc<JetSpace>,
    memo: &mut HashMap<usize, Jet>,
) -> Result<Jet, EvalError> {
    let shared = t.is_shared();
    if shared {
        if let Some(j) = memo.get(&t.node_id()) {
            return Ok(j.clone());
        }
    }
    let out = match t.kind() {
        Kind::Var(j) => inputs[j - 1].clone(),
        Kind::Const(_) => Jet::constant(space, t.approx()),
        Kind::Sum(_, ts) => {
            let mut acc = Jet::constant(space, t.approx());
            for c in ts {
                acc = acc.add(&eval_rec(c, inputs, space, memo)?);
            }
            acc
        }
        Kind::Product(_, fs) => {
            let mut acc = eval_rec(&fs[0], inputs, space, memo)?;
            for f in &fs[1..] {
                acc = acc.mul(&eval_rec(f, inputs, space, memo)?);
            }
            acc.scale(t.approx())
        }
        Kind::Pow(b, e) => eval_rec(b, inputs, space, memo)?.powi(*e),
        Kind::Apply(f, args) => {
            let arg_jets = args
                .iter()
                .map(|a| eval_rec(a, inputs, space, memo))
                .collect::<Result<Vec<_>, _>>()?;
            let base: Vec<f64> = arg_jets.iter().map(Jet::value).collect();
            let generic = Term::apply(f.clone(), (1..=f.arity).map(Term::var).collect());
            let shifts: Vec<Jet> = arg_jets
                .iter()
                .map(|j| j.add_constant(-j.value()))
                .collect();
            // powers[i][k] = s_i^k
            let powers: Vec<Vec<Jet>> = shifts
                .iter()
                .map(|s| {
                    let mut ps = vec![Jet::constant(space, 1.0)];
                    for k in 1..=space.order {
                        let next = ps[k as usize - 1].mul(s);
                        ps.push(next);
                    }
                    ps
                })
                .collect();
            let mut acc = Jet::constant(space, 0.0);
            for beta in multi_indices(f.arity, space.order) {
                let d = evaluate_f64(&d_alpha(&generic, &beta), &base)?;
                if d == 0.0 {
                    continue;
                }
                let mut term = Jet::constant(space, d / beta.factorial());
                for (i, &k) in beta.as_slice().iter().enumerate() {
                    if k > 0 {
                        term = term.mul(&powers[i][k as usize]);
                    }
                }
                acc = acc.add(&term);
            }
            if !acc.is_finite() {
                return Err(EvalError::Overflow {
                    name: f.name.clone(),
                    args: base,
                });
            }
            acc
        }
    };
    if shared {
        memo.insert(t.node_id(), out.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    #[test]
    fn polynomial_derivatives() {
        let t = parse("(* (^ x1 2) x2)").unwrap();
        let j = taylor(&t, &[1.5, -2.0], 3).unwrap();
        assert!((j.derivative(&MultiIndex::new(vec![2, 1])) - 2.0).abs() < 1e-12);
        assert!((j.derivative(&MultiIndex::new(vec![1, 1])) - 3.0).abs() < 1e-12);
        assert!((j.value() - (-4.5)).abs() < 1e-12);
    }

    #[test]
    fn exp_of_linear() {
        let t = parse("(exp (* 2 x1))").unwrap();
        let j = taylor(&t, &[0.3], 5).unwrap();
        for k in 0..=5u32 {
            let expect = 2f64.powi(k as i32) * (0.6f64).exp();
            let got = j.derivative(&MultiIndex::new(vec![k]));
            assert!((got - expect).abs() < 1e-12 * expect.max(1.0), "k={k}");
        }
    }

    #[test]
    fn agrees_with_symbolic_derivatives() {
        let t = parse("(+ (* x1 (exp (* x1 x2))) (^ (- x2 x1) 3))").unwrap();
        let at = [0.4, -0.7];
        let j = taylor(&t, &at, 4).unwrap();
        for alpha in multi_indices(2, 4) {
            let sym = evaluate_f64(&d_alpha(&t, &alpha), &at).unwrap();
            let jet = j.derivative(&alpha);
            assert!((sym - jet).abs() <= 1e-10 * sym.abs().max(1.0), "{alpha}: {sym} vs {jet}");
        }
    }
}

use std::collections::HashMap;

use num_rational::BigRational;

use super::{Kind, Term};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("point has {got} coordinate(s) but the term uses x{needed}")]
    PointTooShort { needed: usize, got: usize },
    #[error("`{name}` overflowed at argument(s) {args:?}")]
    Overflow { name: String, args: Vec<f64> },
}

/// Evaluates at a point of scalars. The result is exact when the term is
/// polynomial (or its basics have exact values there) and every coordinate
/// is exact.
pub fn evaluate(t: &Term, point: &[Scalar]) -> Result<Scalar, EvalError> {
    if point.len() < t.arity() {
        return Err(EvalError::PointTooShort {
            needed: t.arity(),
            got: point.len(),
        });
    }
    let mut memo = HashMap::new();
    eval_scalar(t, point, &mut memo)
}

fn eval_scalar(
    t: &Term,
    point: &[Scalar],
    memo: &mut HashMap<usize, Scalar>,
) -> Result<Scalar, EvalError> {
    let shared = t.is_shared();
    if shared {
        if let Some(v) = memo.get(&t.node_id()) {
            return Ok(v.clone());
        }
    }
    let out = match t.kind() {
        Kind::Var(j) => point[j - 1].clone(),
        Kind::Const(q) => Scalar::Exact(q.clone()),
        Kind::Sum(c, ts) => {
            let mut acc = Scalar::Exact(c.clone());
            for child in ts {
                acc = &acc + &eval_scalar(child, point, memo)?;
            }
            acc
        }
        Kind::Product(c, fs) => {
            let mut acc = Scalar::Exact(c.clone());
            for f in fs {
                acc = &acc * &eval_scalar(f, point, memo)?;
            }
            acc
        }
        Kind::Pow(b, e) => eval_scalar(b, point, memo)?.powi(*e),
        Kind::Apply(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_scalar(a, point, memo))
                .collect::<Result<Vec<_>, _>>()?;
            let exact = f.exact.and_then(|rule| {
                let qs: Option<Vec<BigRational>> = vals
                    .iter()
                    .map(|v| match v {
                        Scalar::Exact(q) => Some(q.clone()),
                        Scalar::Float(_) => None,
                    })
                    .collect();
                qs.and_then(|qs| rule(&qs))
            });
            match exact {
                Some(q) => Scalar::Exact(q),
                None => {
                    let xs: Vec<f64> = vals.iter().map(Scalar::to_f64).collect();
                    let y = (f.eval)(&xs);
                    if !y.is_finite() {
                        return Err(EvalError::Overflow {
                            name: f.name.clone(),
                            args: xs,
                        });
                    }
                    Scalar::Float(y)
                }
            }
        }
    };
    if shared {
        memo.insert(t.node_id(), out.clone());
    }
    Ok(out)
}

/// Float evaluation, round-to-nearest throughout.
pub fn evaluate_f64(t: &Term, point: &[f64]) -> Result<f64, EvalError> {
    if point.len() < t.arity() {
        return Err(EvalError::PointTooShort {
            needed: t.arity(),
            got: point.len(),
        });
    }
    let mut memo = HashMap::new();
    eval_float(t, point, &mut memo)
}

fn eval_float(t: &Term, point: &[f64], memo: &mut HashMap<usize, f64>) -> Result<f64, EvalError> {
    let shared = t.is_shared();
    if shared {
        if let Some(v) = memo.get(&t.node_id()) {
            return Ok(*v);
        }
    }
    let out = match t.kind() {
        Kind::Var(j) => point[j - 1],
        Kind::Const(_) => t.approx(),
        Kind::Sum(_, ts) => {
            let mut acc = t.approx();
            for child in ts {
                acc += eval_float(child, point, memo)?;
            }
            acc
        }
        Kind::Product(_, fs) => {
            let mut acc = t.approx();
            for f in fs {
                acc *= eval_float(f, point, memo)?;
            }
            acc
        }
        Kind::Pow(b, e) => eval_float(b, point, memo)?.powi(*e as i32),
        Kind::Apply(f, args) => {
            let xs = args
                .iter()
                .map(|a| eval_float(a, point, memo))
                .collect::<Result<Vec<_>, _>>()?;
            let y = (f.eval)(&xs);
            if !y.is_finite() {
                return Err(EvalError::Overflow {
                    name: f.name.clone(),
                    args: xs,
                });
            }
            y
        }
    };
    if shared {
        memo.insert(t.node_id(), out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    #[test]
    fn exp_curve_vanishes_exactly() {
        let t = parse("(- x2 (exp x1))").unwrap();
        let v = evaluate(&t, &[Scalar::int(0), Scalar::int(1)]).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn pythagorean_point() {
        let t = parse("(+ (^ x1 2) (^ x2 2) -1)").unwrap();
        let v = evaluate(&t, &[Scalar::ratio(3, 5), Scalar::ratio(4, 5)]).unwrap();
        assert!(v.is_exact() && v.is_zero());
    }

    #[test]
    fn exp_one_within_an_ulp() {
        let t = parse("(exp x1)").unwrap();
        let v = evaluate_f64(&t, &[1.0]).unwrap();
        assert!((v - std::f64::consts::E).abs() <= f64::EPSILON * std::f64::consts::E);
    }

    #[test]
    fn overflow_is_reported() {
        let t = parse("(exp x1)").unwrap();
        assert!(matches!(
            evaluate_f64(&t, &[1000.0]),
            Err(EvalError::Overflow { .. })
        ));
    }

    #[test]
    fn short_point_rejected() {
        let t = parse("(* x1 x3)").unwrap();
        assert!(matches!(
            evaluate_f64(&t, &[1.0, 2.0]),
            Err(EvalError::PointTooShort { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn scaled_exp_at_zero() {
        let t = parse("(exp x1)").unwrap().scale(&BigRational::new(1.into(), 2.into()));
        assert_eq!(evaluate(&t, &[Scalar::int(0)]).unwrap(), Scalar::ratio(1, 2));
    }
}

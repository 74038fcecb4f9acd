//! Augmentation by `f_{p+1} = x_{n+1}·Q(x̄) − 1`. The augmented zero set is
//! regular everywhere and projects onto the regular locus of the original
//! system.

use crate::jacobian::{is_regular_at, q_value, q_witness, FunctionSystem, SystemError};
use crate::scalar::Scalar;
use crate::term::{EvalError, Term};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClosureError {
    #[error("augmentation needs p ≤ n (p = {p}, n = {n})")]
    Overdetermined { p: usize, n: usize },
    #[error("point is not regular: residual {residual:e}, Q = {q:e}")]
    NotRegular { residual: f64, q: f64 },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `(f_1, …, f_p, x_{n+1}·Q − 1)` in dimension `n + 1`.
pub fn augment(sys: &FunctionSystem) -> Result<FunctionSystem, ClosureError> {
    let (p, n) = (sys.len(), sys.dim());
    if p > n {
        return Err(ClosureError::Overdetermined { p, n });
    }
    let q = q_witness(sys)?;
    let extra = &(&Term::var(n + 1) * &q) - &Term::one();
    Ok(sys.lifted(n + 1).with_function(extra))
}

/// Appends `1/Q(point)`. Refuses points that are not regular under the
/// given tolerances.
pub fn lift_point(
    sys: &FunctionSystem,
    point: &[Scalar],
    tol_res: f64,
    tol_reg: f64,
) -> Result<Vec<Scalar>, ClosureError> {
    let verdict = is_regular_at(sys, point, tol_res, tol_reg)?;
    if !verdict.regular {
        return Err(ClosureError::NotRegular {
            residual: verdict.residual,
            q: verdict.q,
        });
    }
    let q = q_value(sys, point)?;
    let inv = q.recip().ok_or(ClosureError::NotRegular {
        residual: verdict.residual,
        q: verdict.q,
    })?;
    let mut out = point[..sys.dim()].to_vec();
    out.push(inv);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{evaluate, parse};

    fn sys(n: usize, srcs: &[&str]) -> FunctionSystem {
        FunctionSystem::new(n, srcs.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn coordinate_line() {
        let a = augment(&sys(1, &["x1"])).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.functions()[1], parse("(- x2 1)").unwrap());
        let lifted = lift_point(&sys(1, &["x1"]), &[Scalar::zero()], 0.0, 0.0).unwrap();
        assert_eq!(lifted, vec![Scalar::zero(), Scalar::one()]);
        assert!(is_regular_at(&a, &lifted, 0.0, 0.0).unwrap().regular);
    }

    #[test]
    fn double_line_has_no_augmented_zero() {
        let s = sys(1, &["(^ x1 2)"]);
        let a = augment(&s).unwrap();
        // x1 = 0 is forced by the first equation, leaving -1 in the second.
        let v = evaluate(&a.functions()[1], &[Scalar::zero(), Scalar::int(7)]).unwrap();
        assert_eq!(v, Scalar::int(-1));
        assert!(matches!(
            lift_point(&s, &[Scalar::zero()], 0.0, 0.0),
            Err(ClosureError::NotRegular { .. })
        ));
    }

    #[test]
    fn exponential_graph() {
        let s = sys(2, &["(- x2 (exp x1))"]);
        let lifted = lift_point(&s, &[Scalar::zero(), Scalar::one()], 1e-12, 1e-9).unwrap();
        assert_eq!(lifted[2], Scalar::ratio(1, 2));
        let a = augment(&s).unwrap();
        for f in a.functions() {
            assert_eq!(evaluate(f, &lifted).unwrap(), Scalar::zero());
        }
        assert!(is_regular_at(&a, &lifted, 1e-12, 1e-9).unwrap().regular);
    }
}

//! Gradients, Jacobians and the regularity witness
//! `Q = Σ (p×p minors of J)²`, which is positive exactly where the
//! gradients of `f_1, …, f_p` are linearly independent.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_rational::BigRational;
use serde::Serialize;

use crate::linalg::{combinations, det, det_scalar};
use crate::scalar::Scalar;
use crate::term::{evaluate, evaluate_f64, partial, EvalError, Term};

/// Largest block for which symbolic determinants are expanded.
pub const MAX_SYMBOLIC_DET: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("a system needs at least one function")]
    Empty,
    #[error("function {index} uses x{arity} but the dimension is {dim}")]
    ArityExceedsDimension {
        index: usize,
        arity: usize,
        dim: usize,
    },
    #[error("symbolic determinant of a {0}×{0} block exceeds the cap of {MAX_SYMBOLIC_DET}")]
    DeterminantTooLarge(usize),
}

/// `f_1, …, f_p` in ambient dimension `n`.
#[derive(Clone, Debug)]
pub struct FunctionSystem {
    dim: usize,
    functions: Vec<Term>,
    jacobian: OnceLock<Vec<Vec<Term>>>,
}

impl FunctionSystem {
    pub fn new(dim: usize, functions: Vec<Term>) -> Result<Self, SystemError> {
        if functions.is_empty() {
            return Err(SystemError::Empty);
        }
        for (i, f) in functions.iter().enumerate() {
            if f.arity() > dim {
                return Err(SystemError::ArityExceedsDimension {
                    index: i + 1,
                    arity: f.arity(),
                    dim,
                });
            }
        }
        Ok(FunctionSystem {
            dim,
            functions,
            jacobian: OnceLock::new(),
        })
    }

    /// `x_1, …, x_n`.
    pub fn coordinates(n: usize) -> Self {
        FunctionSystem::new(n, (1..=n).map(Term::var).collect()).expect("n >= 1")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[Term] {
        &self.functions
    }

    /// Same functions regarded in a larger ambient dimension.
    pub fn lifted(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        FunctionSystem {
            dim,
            functions: self.functions.clone(),
            jacobian: OnceLock::new(),
        }
    }

    /// Appends `f`, growing the dimension if `f` needs it.
    pub fn with_function(&self, f: Term) -> Self {
        let dim = self.dim.max(f.arity());
        let mut functions = self.functions.clone();
        functions.push(f);
        FunctionSystem {
            dim,
            functions,
            jacobian: OnceLock::new(),
        }
    }

    /// Cached `p × n` matrix of partials.
    pub fn jacobian(&self) -> &[Vec<Term>] {
        self.jacobian
            .get_or_init(|| self.functions.iter().map(|f| grad(f, self.dim)).collect())
    }

    pub fn residuals_f64(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.functions.iter().map(|f| evaluate_f64(f, point)).collect()
    }

    pub fn jacobian_f64(&self, point: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.jacobian()
            .iter()
            .map(|row| row.iter().map(|t| evaluate_f64(t, point)).collect())
            .collect()
    }

    pub fn jacobian_values(&self, point: &[Scalar]) -> Result<Vec<Vec<Scalar>>, EvalError> {
        self.jacobian()
            .iter()
            .map(|row| row.iter().map(|t| evaluate(t, point)).collect())
            .collect()
    }
}

/// `(∂f/∂x_1, …, ∂f/∂x_n)`.
pub fn grad(f: &Term, n: usize) -> Vec<Term> {
    (1..=n).map(|j| partial(f, j)).collect()
}

pub fn jacobian(sys: &FunctionSystem) -> Vec<Vec<Term>> {
    sys.jacobian().to_vec()
}

/// Symbolic determinant by Laplace expansion along rows, memoized over
/// column subsets.
pub fn determinant(m: &[Vec<Term>]) -> Result<Term, SystemError> {
    let p = m.len();
    if p == 0 {
        return Ok(Term::one());
    }
    if p > MAX_SYMBOLIC_DET {
        return Err(SystemError::DeterminantTooLarge(p));
    }
    let cols: Vec<usize> = (0..p).collect();
    let mut memo = HashMap::new();
    Ok(laplace(m, 0, &cols, &mut memo))
}

fn laplace(m: &[Vec<Term>], row: usize, cols: &[usize], memo: &mut HashMap<Vec<usize>, Term>) -> Term {
    if row == m.len() {
        return Term::one();
    }
    if let Some(t) = memo.get(cols) {
        return t.clone();
    }
    let mut terms = Vec::new();
    for (k, &c) in cols.iter().enumerate() {
        let entry = &m[row][c];
        if entry.is_zero_term() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = laplace(m, row + 1, &rest, memo);
        if minor.is_zero_term() {
            continue;
        }
        let t = entry * &minor;
        terms.push(if k % 2 == 1 { -t } else { t });
    }
    let out = Term::sum(terms);
    memo.insert(cols.to_vec(), out.clone());
    out
}

/// Submatrix with the given columns.
pub fn columns(m: &[Vec<Term>], cols: &[usize]) -> Vec<Vec<Term>> {
    m.iter()
        .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
        .collect()
}

/// Sum over all `p`-column subsets of the squared minor; zero when `p > n`.
pub fn q_witness(sys: &FunctionSystem) -> Result<Term, SystemError> {
    let p = sys.len();
    let n = sys.dim();
    if p > n {
        return Ok(Term::zero());
    }
    let jac = sys.jacobian();
    let squares = combinations(n, p)
        .into_iter()
        .map(|cols| determinant(&columns(jac, &cols)).map(|d| d.square()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Term::sum(squares))
}

/// `Q(point)` computed from the evaluated Jacobian; exact when the
/// Jacobian entries are.
pub fn q_value(sys: &FunctionSystem, point: &[Scalar]) -> Result<Scalar, EvalError> {
    let p = sys.len();
    let n = sys.dim();
    if p > n {
        return Ok(Scalar::zero());
    }
    let jac = sys.jacobian_values(point)?;
    let mut total = Scalar::zero();
    for cols in combinations(n, p) {
        let sub: Vec<Vec<Scalar>> = jac
            .iter()
            .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
            .collect();
        let d = det_scalar(&sub);
        total = &total + &(&d * &d);
    }
    Ok(total)
}

pub fn q_value_f64(sys: &FunctionSystem, point: &[f64]) -> Result<f64, EvalError> {
    let p = sys.len();
    let n = sys.dim();
    if p > n {
        return Ok(0.0);
    }
    let jac = sys.jacobian_f64(point)?;
    Ok(combinations(n, p)
        .into_iter()
        .map(|cols| {
            let sub: Vec<Vec<f64>> = jac
                .iter()
                .map(|row| cols.iter().map(|&c| row[c]).collect())
                .collect();
            det(&sub).powi(2)
        })
        .sum())
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RegularityVerdict {
    /// `max_i |f_i(point)|`.
    pub residual: f64,
    /// `Q(point)`.
    pub q: f64,
    pub regular: bool,
    pub tol_res: f64,
    pub tol_reg: f64,
    pub exact: bool,
}

/// `residual ≤ tol_res` and `Q ≥ tol_reg` with `Q > 0`. With an exact point
/// and exact Jacobian values the comparisons are exact, so zero tolerances
/// give the exact verdict on polynomial systems.
pub fn is_regular_at(
    sys: &FunctionSystem,
    point: &[Scalar],
    tol_res: f64,
    tol_reg: f64,
) -> Result<RegularityVerdict, EvalError> {
    let values = sys
        .functions()
        .iter()
        .map(|f| evaluate(f, point))
        .collect::<Result<Vec<_>, _>>()?;
    let residual = values
        .iter()
        .map(Scalar::abs)
        .fold(Scalar::zero(), |m, v| if v.cmp_value(&m).is_gt() { v } else { m });
    let q = q_value(sys, point)?;
    let exact = residual.is_exact() && q.is_exact();
    let as_scalar = |t: f64| {
        BigRational::from_float(t)
            .map(Scalar::Exact)
            .unwrap_or(Scalar::Float(t))
    };
    let regular = residual.cmp_value(&as_scalar(tol_res)).is_le()
        && q.cmp_value(&as_scalar(tol_reg)).is_ge()
        && q.cmp_value(&Scalar::zero()).is_gt();
    Ok(RegularityVerdict {
        residual: residual.to_f64(),
        q: q.to_f64(),
        regular,
        tol_res,
        tol_reg,
        exact,
    })
}

pub fn is_regular_at_f64(
    sys: &FunctionSystem,
    point: &[f64],
    tol_res: f64,
    tol_reg: f64,
) -> Result<RegularityVerdict, EvalError> {
    let residual = sys
        .residuals_f64(point)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let q = q_value_f64(sys, point)?;
    Ok(RegularityVerdict {
        residual,
        q,
        regular: residual <= tol_res && q >= tol_reg && q > 0.0,
        tol_res,
        tol_reg,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    fn sys(n: usize, srcs: &[&str]) -> FunctionSystem {
        FunctionSystem::new(n, srcs.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn grad_examples() {
        let g = grad(&parse("(+ (^ x1 2) (^ x2 2))").unwrap(), 2);
        assert_eq!(g, vec![parse("(* 2 x1)").unwrap(), parse("(* 2 x2)").unwrap()]);
        let g = grad(&parse("(- x2 (exp x1))").unwrap(), 2);
        assert_eq!(g, vec![parse("(- (exp x1))").unwrap(), Term::one()]);
        assert!(grad(&Term::int(5), 3).iter().all(Term::is_zero_term));
    }

    #[test]
    fn coordinate_jacobian_is_identity() {
        let j = jacobian(&FunctionSystem::coordinates(3));
        for (r, row) in j.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                assert_eq!(e, &Term::int((r == c) as i64));
            }
        }
    }

    #[test]
    fn q_examples() {
        assert_eq!(q_witness(&FunctionSystem::coordinates(3)).unwrap(), Term::one());
        let q = q_witness(&sys(2, &["(- x2 (exp x1))"])).unwrap();
        assert_eq!(q.to_string(), "(+ (^ (exp x1) 2) 1)");
        let q = q_witness(&sys(1, &["x1", "(^ x1 2)"])).unwrap();
        assert!(q.is_zero_term());
    }

    #[test]
    fn regularity_examples() {
        let zero = vec![Scalar::zero(); 3];
        let v = is_regular_at(&FunctionSystem::coordinates(3), &zero, 0.0, 0.0).unwrap();
        assert!(v.regular && v.exact && v.q == 1.0);

        let v = is_regular_at(&sys(1, &["(^ x1 2)"]), &[Scalar::zero()], 0.0, 0.0).unwrap();
        assert!(!v.regular);
        assert_eq!(v.q, 0.0);

        let v = is_regular_at(&sys(2, &["(- x2 (exp x1))"]), &[Scalar::zero(), Scalar::one()], 1e-9, 1e-6)
            .unwrap();
        assert!(v.regular);
        assert_eq!(v.q, 2.0);
    }

    #[test]
    fn determinant_cap() {
        let m = vec![vec![Term::one(); 9]; 9];
        assert!(matches!(determinant(&m), Err(SystemError::DeterminantTooLarge(9))));
    }

    #[test]
    fn arity_checked() {
        assert!(FunctionSystem::new(1, vec![parse("x2").unwrap()]).is_err());
        assert!(FunctionSystem::new(1, vec![]).is_err());
    }
}

//! Registered basic functions.
//!
//! Each basic carries its arity, a symbolic partial-derivative rule whose
//! output only mentions registered names, a float evaluation rule and an
//! optional control-data template. A registry is built once and then only
//! read; terms hold `Arc<Basic>` handles so evaluation and differentiation
//! never consult global state.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::Term;
use crate::control::ControlData;

/// Symbolic partial of `this = name(args)` with respect to argument `i`.
pub type PartialRule = fn(this: &Term, args: &[Term], i: usize) -> Term;
/// Float evaluation; a non-finite result is reported as overflow.
pub type EvalRule = fn(args: &[f64]) -> f64;
/// Exact evaluation where the value is rational (e.g. `exp(0) = 1`).
pub type ExactRule = fn(args: &[BigRational]) -> Option<BigRational>;
/// Control data for `name(args)` where every argument is a coordinate.
pub type ControlRule = fn(args: &[Term], max_order: usize) -> ControlData;

pub struct Basic {
    pub name: String,
    pub arity: usize,
    pub partial: PartialRule,
    pub eval: EvalRule,
    pub exact: Option<ExactRule>,
    pub control: Option<ControlRule>,
}

impl fmt::Debug for Basic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Basic")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct BasicRegistry {
    basics: BTreeMap<String, Arc<Basic>>,
}

impl BasicRegistry {
    pub fn empty() -> Self {
        BasicRegistry {
            basics: BTreeMap::new(),
        }
    }

    /// The shipped registry: `exp` only. Polynomials need no registration.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.basics.insert("exp".to_string(), standard_exp());
        reg
    }

    /// Adds or replaces a basic. Names that clash with grammar operators
    /// or look like variables are rejected.
    pub fn register(&mut self, basic: Basic) -> bool {
        let name = basic.name.as_str();
        let reserved = matches!(name, "+" | "*" | "-" | "/" | "^")
            || name.is_empty()
            || (name.starts_with('x') && name[1..].chars().all(|c| c.is_ascii_digit()));
        if reserved || !name.chars().all(|c| c.is_ascii_graphic() && c != '(' && c != ')') {
            return false;
        }
        self.basics.insert(basic.name.clone(), Arc::new(basic));
        true
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Basic>> {
        self.basics.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.basics.keys().map(|s| s.as_str())
    }

    /// `name(x1, …, x_arity)`.
    pub fn generic_application(&self, name: &str) -> Option<Term> {
        let basic = self.get(name)?;
        let args = (1..=basic.arity).map(Term::var).collect();
        Some(Term::apply(basic.clone(), args))
    }
}

impl Default for BasicRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

fn exp_basic() -> Basic {
    Basic {
        name: "exp".to_string(),
        arity: 1,
        partial: |this, _args, _i| this.clone(),
        eval: |args| args[0].exp(),
        exact: Some(|args| args[0].is_zero().then(BigRational::one)),
        control: Some(|args, max_order| {
            let omega = Term::one() + Term::apply(standard_exp(), args.to_vec());
            ControlData::new(omega, vec![1.0; max_order + 1], vec![1; max_order + 1])
        }),
    }
}

/// Shared handle to the shipped `exp`.
pub fn standard_exp() -> Arc<Basic> {
    use std::sync::OnceLock;
    static EXP: OnceLock<Arc<Basic>> = OnceLock::new();
    EXP.get_or_init(|| Arc::new(exp_basic())).clone()
}

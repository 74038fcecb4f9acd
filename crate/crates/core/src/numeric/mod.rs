//! Numeric point services: zero finding, Newton refinement, constrained
//! minimum distance, numeric rank and flatness probes.

mod minimize;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::jacobian::FunctionSystem;
use crate::jet::taylor;
use crate::linalg::{min_norm_solve, norm_inf, solve};
use crate::scalar::Scalar;
use crate::term::{evaluate_f64, EvalError, Term};

pub use minimize::{min_distance_point, MinDistance};

/// Default numeric settings shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tol_res: f64,
    pub tol_reg: f64,
    pub tol_nonflat: f64,
    pub fd_step: f64,
    pub multistart: usize,
    pub max_order: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_res: 1e-9,
            tol_reg: 1e-6,
            tol_nonflat: 1e-7,
            fd_step: 1e-5,
            multistart: 8,
            max_order: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("singular Jacobian at {0:?}")]
    SingularJacobian(Vec<f64>),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("no feasible point reached from any start")]
    Infeasible,
    #[error("Newton refinement needs a square system ({p} functions, {n} variables)")]
    NotSquare { p: usize, n: usize },
    #[error("invalid box: {0}")]
    BadBox(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Axis-aligned closed box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, NumericError> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(NumericError::BadBox(format!("{lo:?} / {hi:?}")));
        }
        Ok(SearchBox { lo, hi })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        SearchBox {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= l - slack && *v <= h + slack)
    }

    /// Same box repeated or truncated to dimension `n`; a single interval
    /// applies to every axis.
    pub fn resized(&self, n: usize) -> SearchBox {
        let pick = |v: &[f64], i: usize| v[i.min(v.len() - 1)];
        SearchBox {
            lo: (0..n).map(|i| pick(&self.lo, i)).collect(),
            hi: (0..n).map(|i| pick(&self.hi, i)).collect(),
        }
    }
}

/// `lo:hi,lo:hi,…`.
impl FromStr for SearchBox {
    type Err = NumericError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for part in s.split(',') {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| NumericError::BadBox(s.to_string()))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| NumericError::BadBox(s.to_string()))
            };
            lo.push(parse(a)?);
            hi.push(parse(b)?);
        }
        SearchBox::new(lo, hi)
    }
}

fn grid_axis(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Lexicographic order on points with a total order on floats.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c.is_ne() {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// Polishes a candidate onto `f = 0` by min-norm Newton steps along `∇f`.
fn polish_scalar(f: &Term, grad: &[Term], start: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    for _ in 0..60 {
        let v = evaluate_f64(f, &x).ok()?;
        if !v.is_finite() {
            return None;
        }
        if v.abs() <= tol * 1e-3 {
            return Some(x);
        }
        let g: Vec<f64> = grad
            .iter()
            .map(|d| evaluate_f64(d, &x))
            .collect::<Result<_, _>>()
            .ok()?;
        let gg: f64 = g.iter().map(|c| c * c).sum();
        if gg == 0.0 || !gg.is_finite() {
            break;
        }
        let prev = x.clone();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= v * gi / gg;
        }
        if norm_inf(&prev.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>())
            <= 1e-16 * (1.0 + norm_inf(&x))
        {
            break;
        }
    }
    let v = evaluate_f64(f, &x).ok()?;
    (v.abs() <= tol).then_some(x)
}

/// Approximate zeros of `f` in `bx`: grid scan for sign changes and local
/// minima of `|f|`, Newton polish, deduplication within `1e-6`, sorted
/// lexicographically.
pub fn find_zero(f: &Term, bx: &SearchBox, grid_per_dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let n = bx.dim();
    let k = grid_per_dim.max(2);
    let axes: Vec<Vec<f64>> = (0..n).map(|i| grid_axis(bx.lo[i], bx.hi[i], k)).collect();
    let total = k.pow(n as u32);
    let point_of = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for d in (0..n).rev() {
            x[d] = axes[d][idx % k];
            idx /= k;
        }
        x
    };
    let stride = |d: usize| k.pow((n - 1 - d) as u32);
    if f.is_zero_term() {
        return (0..total).map(point_of).collect();
    }
    let values: Vec<f64> = (0..total)
        .map(|i| evaluate_f64(f, &point_of(i)).unwrap_or(f64::NAN))
        .collect();
    let grad: Vec<Term> = (1..=n).map(|j| crate::term::partial(f, j)).collect();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for i in 0..total {
        let v = values[i];
        if !v.is_finite() {
            continue;
        }
        let mut local_min = true;
        for d in 0..n {
            let coord = (i / stride(d)) % k;
            for (ok, j) in [(coord > 0, i.wrapping_sub(stride(d))), (coord + 1 < k, i + stride(d))] {
                if !ok {
                    continue;
                }
                let w = values[j];
                if !w.is_finite() {
                    continue;
                }
                if w.abs() < v.abs() {
                    local_min = false;
                }
                if j > i && (v == 0.0 || v.signum() != w.signum()) {
                    let t = if v == w { 0.5 } else { v / (v - w) };
                    let (a, b) = (point_of(i), point_of(j));
                    candidates.push(a.iter().zip(&b).map(|(p, q)| p + t * (q - p)).collect());
                }
            }
        }
        if local_min {
            candidates.push(point_of(i));
        }
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        if let Some(x) = polish_scalar(f, &grad, &c, tol) {
            if bx.contains(&x, 1e-9) {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| lex_cmp(a, b));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in found {
        let dup = out.iter().any(|y| {
            norm_inf(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-6
        });
        if !dup {
            out.push(x);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonResult {
    pub point: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Residual before each step and at the end.
    pub history: Vec<f64>,
}

/// Newton's method on a square system.
pub fn newton_refine(
    sys: &FunctionSystem,
    start: &[f64],
    iters: usize,
    tol: f64,
) -> Result<NewtonResult, NumericError> {
    let (p, n) = (sys.len(), sys.dim());
    if p != n {
        return Err(NumericError::NotSquare { p, n });
    }
    let mut x = start.to_vec();
    let mut history = Vec::new();
    for it in 0..=iters {
        let r = sys.residuals_f64(&x)?;
        let size = norm_inf(&r);
        history.push(size);
        if !size.is_finite() {
            break;
        }
        if size <= tol {
            return Ok(NewtonResult {
                point: x,
                residual: size,
                iterations: it,
                history,
            });
        }
        if it == iters {
            break;
        }
        let j = sys.jacobian_f64(&x)?;
        let step = solve(&j, &r).ok_or_else(|| NumericError::SingularJacobian(x.clone()))?;
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi -= s;
        }
    }
    Err(NumericError::NonConvergence {
        iterations: iters,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Gauss–Newton projection onto `{sys = 0}` with min-norm steps.
pub fn project(sys: &FunctionSystem, start: &[f64], tol: f64) -> Result<Vec<f64>, NumericError> {
    let mut x = start.to_vec();
    let mut best = f64::INFINITY;
    for it in 0..80 {
        let r = sys.residuals_f64(&x)?;
        let size = norm_inf(&r);
        if !size.is_finite() {
            break;
        }
        if size <= tol * 1e-3 || (size <= tol && size >= best) {
            return Ok(x);
        }
        best = best.min(size);
        let j = sys.jacobian_f64(&x)?;
        let Some(step) = min_norm_solve(&j, &r) else {
            break;
        };
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi -= s;
        }
        if it > 40 && size > 1.0 {
            break;
        }
    }
    let size = norm_inf(&sys.residuals_f64(&x)?);
    if size <= tol {
        Ok(x)
    } else {
        Err(NumericError::NonConvergence {
            iterations: 80,
            residual: size,
        })
    }
}

/// Rank by complete-pivot elimination. Exact arithmetic when every entry
/// is exact and `tol == 0`; otherwise pivots at most `tol·max|entry|` count
/// as zero.
pub fn numeric_rank(values: &[Vec<Scalar>], tol: f64) -> usize {
    let rows = values.len();
    if rows == 0 {
        return 0;
    }
    let cols = values[0].len();
    if tol == 0.0 && values.iter().all(|r| r.iter().all(Scalar::is_exact)) {
        let mut m = values.to_vec();
        let mut rank = 0;
        for col in 0..cols {
            let Some(p) = (rank..rows).find(|&i| !m[i][col].is_zero()) else {
                continue;
            };
            m.swap(rank, p);
            for i in rank + 1..rows {
                if m[i][col].is_zero() {
                    continue;
                }
                let factor = &m[i][col] / &m[rank][col];
                for k in col..cols {
                    let delta = &factor * &m[rank][k];
                    m[i][k] = &m[i][k] - &delta;
                }
            }
            rank += 1;
            if rank == rows {
                break;
            }
        }
        return rank;
    }
    let mut m: Vec<Vec<f64>> = values
        .iter()
        .map(|r| r.iter().map(Scalar::to_f64).collect())
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let floor = tol * scale;
    let mut rank = 0;
    while rank < rows.min(cols) {
        let mut best = (rank, rank, 0.0f64);
        for i in rank..rows {
            for j in rank..cols {
                if m[i][j].abs() > best.2 {
                    best = (i, j, m[i][j].abs());
                }
            }
        }
        if best.2 <= floor || best.2 == 0.0 {
            break;
        }
        m.swap(rank, best.0);
        for row in m.iter_mut() {
            row.swap(rank, best.1);
        }
        for i in rank + 1..rows {
            let factor = m[i][rank] / m[rank][rank];
            for k in rank..cols {
                m[i][k] -= factor * m[rank][k];
            }
        }
        rank += 1;
    }
    rank
}

/// True iff every `|D^α f(a)|` with `|α| ≤ k` is at most `tol`.
pub fn flat_probe(f: &Term, a: &[f64], k: u32, tol: f64) -> Result<bool, EvalError> {
    if f.is_zero_term() {
        return Ok(true);
    }
    let jet = taylor(f, a, k)?;
    Ok(jet.derivatives().iter().all(|(_, d)| d.abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    #[test]
    fn zeros_of_exponential_graph() {
        let f = parse("(- x2 (exp x1))").unwrap();
        let zs = find_zero(&f, &SearchBox::cube(2, -1.0, 1.0), 11, 1e-12);
        assert!(zs.iter().any(|z| z[0].abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9));
        assert!(zs.iter().all(|z| (z[1] - z[0].exp()).abs() <= 1e-12));
    }

    #[test]
    fn no_zeros_of_positive_function() {
        let f = parse("(+ (^ x1 2) 1)").unwrap();
        assert!(find_zero(&f, &SearchBox::cube(1, -3.0, 3.0), 31, 1e-9).is_empty());
    }

    #[test]
    fn zero_function_returns_grid() {
        let zs = find_zero(&Term::zero(), &SearchBox::cube(2, 0.0, 1.0), 3, 1e-9);
        assert_eq!(zs.len(), 9);
    }

    #[test]
    fn newton_square_root_of_two() {
        let sys = FunctionSystem::new(1, vec![parse("(- (^ x1 2) 2)").unwrap()]).unwrap();
        let r = newton_refine(&sys, &[1.5], 6, 1e-12).unwrap();
        assert!((r.point[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.iterations <= 6);
        let fixed = newton_refine(&sys, &r.point, 6, 1e-12).unwrap();
        assert_eq!(fixed.iterations, 0);
        let degenerate = FunctionSystem::new(1, vec![parse("(^ x1 2)").unwrap()]).unwrap();
        assert!(newton_refine(&degenerate, &[1.0], 6, 1e-12).is_err());
    }

    #[test]
    fn rank_examples() {
        let id: Vec<Vec<Scalar>> = (0..3)
            .map(|i| (0..3).map(|j| Scalar::int((i == j) as i64)).collect())
            .collect();
        assert_eq!(numeric_rank(&id, 0.0), 3);
        let dup = vec![
            vec![Scalar::int(2), Scalar::int(0)],
            vec![Scalar::int(2), Scalar::int(0)],
        ];
        assert_eq!(numeric_rank(&dup, 0.0), 1);
        assert_eq!(numeric_rank(&dup, 1e-12), 1);
    }

    #[test]
    fn flat_probe_examples() {
        assert!(flat_probe(&Term::zero(), &[0.3], 5, 1e-7).unwrap());
        assert!(!flat_probe(&parse("(^ x1 2)").unwrap(), &[0.0], 2, 1e-7).unwrap());
        assert!(flat_probe(&parse("(^ x1 2)").unwrap(), &[0.0], 1, 1e-7).unwrap());
        assert!(!flat_probe(&parse("(exp x1)").unwrap(), &[-5.0], 0, 1e-7).unwrap());
    }

    #[test]
    fn box_parsing() {
        let b: SearchBox = "-1:1,0:2.5".parse().unwrap();
        assert_eq!(b.lo, vec![-1.0, 0.0]);
        assert_eq!(b.hi, vec![1.0, 2.5]);
        assert!("1:0".parse::<SearchBox>().is_err());
    }
}

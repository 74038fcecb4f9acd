//! Implicit charts. On `{g_1 = ⋯ = g_q = 0}` near a point where the block
//! of solved columns is invertible, the solved coordinates are functions
//! `φ` of the free ones. A [`Chart`] evaluates `φ` by Newton continuation
//! and its Taylor jets by power-series Newton iteration.

use crate::jacobian::{columns, determinant, FunctionSystem, SystemError};
use crate::jet::{evaluate_jet, Jet, JetSpace};
use crate::linalg::{norm_inf, solve};
use crate::term::{evaluate_f64, EvalError, Term};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("free and solved columns must partition 0..{0} with one solved column per equation")]
    Shape(usize),
    #[error("solved block is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("Newton tracking did not converge at {0:?}")]
    NonConvergence(Vec<f64>),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Clone, Debug)]
pub struct Chart {
    sys: FunctionSystem,
    free: Vec<usize>,
    solved: Vec<usize>,
    base: Vec<f64>,
}

const NEWTON_ITERS: usize = 60;

impl Chart {
    /// `free` and `solved` are zero-based column indices; `base` is a point
    /// of the zero set.
    pub fn new(
        sys: FunctionSystem,
        free: Vec<usize>,
        solved: Vec<usize>,
        base: Vec<f64>,
    ) -> Result<Self, ChartError> {
        let n = sys.dim();
        let mut seen = vec![false; n];
        for &c in free.iter().chain(&solved) {
            if c >= n || seen[c] {
                return Err(ChartError::Shape(n));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) || solved.len() != sys.len() || base.len() != n {
            return Err(ChartError::Shape(n));
        }
        let chart = Chart {
            sys,
            free,
            solved,
            base,
        };
        if solve_block(&chart.block(&chart.base)?).is_none() {
            return Err(ChartError::Singular(chart.base.clone()));
        }
        Ok(chart)
    }

    pub fn system(&self) -> &FunctionSystem {
        &self.sys
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn solved(&self) -> &[usize] {
        &self.solved
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Free coordinates of the base point.
    pub fn base_free(&self) -> Vec<f64> {
        self.free.iter().map(|&c| self.base[c]).collect()
    }

    /// Symbolic determinant of the solved block.
    pub fn delta(&self) -> Result<Term, ChartError> {
        Ok(determinant(&columns(self.sys.jacobian(), &self.solved))?)
    }

    fn block(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, ChartError> {
        let jac = self.sys.jacobian();
        jac.iter()
            .map(|row| {
                self.solved
                    .iter()
                    .map(|&c| evaluate_f64(&row[c], x).map_err(ChartError::from))
                    .collect()
            })
            .collect()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, ChartError> {
        Ok(self.sys.residuals_f64(x)?)
    }

    fn newton(&self, x: &mut [f64]) -> Result<bool, ChartError> {
        let scale = 1.0 + norm_inf(x);
        let mut last = f64::INFINITY;
        for _ in 0..NEWTON_ITERS {
            let r = self.residual(x)?;
            let size = norm_inf(&r);
            if !size.is_finite() {
                return Ok(false);
            }
            if size <= 1e-15 * scale || (size <= 1e-11 && size >= last) {
                return Ok(true);
            }
            last = size;
            let Some(step) = solve(&self.block(x)?, &r) else {
                return Ok(false);
            };
            for (k, &c) in self.solved.iter().enumerate() {
                x[c] -= step[k];
            }
        }
        Ok(norm_inf(&self.residual(x)?) <= 1e-11)
    }

    /// Full point `(y, φ(y))`, tracked from the base point along the
    /// straight segment in the free coordinates.
    pub fn point(&self, y: &[f64]) -> Result<Vec<f64>, ChartError> {
        assert_eq!(y.len(), self.free.len());
        let start = self.base_free();
        let mut steps = 1usize;
        while steps <= 1024 {
            let mut x = self.base.clone();
            let mut ok = true;
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                for (i, &c) in self.free.iter().enumerate() {
                    x[c] = start[i] + t * (y[i] - start[i]);
                }
                if !self.newton(&mut x)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(x);
            }
            steps *= 4;
        }
        Err(ChartError::NonConvergence(y.to_vec()))
    }

    /// Jets of all coordinates at `(y, φ(y))` in the free variables.
    pub fn jets(&self, y: &[f64], order: u32) -> Result<Vec<Jet>, ChartError> {
        let x0 = self.point(y)?;
        let space = JetSpace::new(self.free.len(), order);
        let mut xs: Vec<Jet> = x0.iter().map(|&v| Jet::constant(&space, v)).collect();
        for (i, &c) in self.free.iter().enumerate() {
            xs[c] = Jet::variable(&space, x0[c], i);
        }
        let block = self.block(&x0)?;
        for _ in 0..=order {
            let g: Vec<Jet> = self
                .sys
                .functions()
                .iter()
                .map(|f| evaluate_jet(f, &xs))
                .collect::<Result<_, _>>()?;
            for idx in 1..space.monomials().len() {
                let rhs: Vec<f64> = g.iter().map(|j| j.coeffs()[idx]).collect();
                let Some(step) = solve_block_rhs(&block, &rhs) else {
                    return Err(ChartError::Singular(x0));
                };
                for (k, &c) in self.solved.iter().enumerate() {
                    xs[c].coeffs_mut()[idx] -= step[k];
                }
            }
        }
        Ok(xs)
    }

    /// Jet of `f(y, φ(y))` in the free variables.
    pub fn compose(&self, f: &Term, y: &[f64], order: u32) -> Result<Jet, ChartError> {
        let xs = self.jets(y, order)?;
        if xs.is_empty() {
            let space = JetSpace::new(self.free.len(), order);
            return Ok(Jet::constant(&space, evaluate_f64(f, &[])?));
        }
        Ok(evaluate_jet(f, &xs)?)
    }
}

fn solve_block(block: &[Vec<f64>]) -> Option<()> {
    if block.is_empty() {
        return Some(());
    }
    solve(&block.to_vec(), &vec![0.0; block.len()]).map(|_| ())
}

fn solve_block_rhs(block: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    if block.is_empty() {
        return Some(Vec::new());
    }
    if rhs.iter().all(|v| *v == 0.0) {
        return Some(vec![0.0; rhs.len()]);
    }
    solve(&block.to_vec(), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse, MultiIndex};

    fn circle_chart() -> Chart {
        let sys = FunctionSystem::new(2, vec![parse("(+ (^ x1 2) (^ x2 2) -1)").unwrap()]).unwrap();
        Chart::new(sys, vec![1], vec![0], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn circle_point_and_jets() {
        let chart = circle_chart();
        let y = 0.3f64;
        let x = chart.point(&[y]).unwrap();
        assert!((x[0] - (1.0 - y * y).sqrt()).abs() < 1e-14);
        let jets = chart.jets(&[y], 4).unwrap();
        // φ(y) = sqrt(1 - y²): φ' = -y/φ, φ'' = -1/φ³.
        let phi = x[0];
        let d1 = jets[0].derivative(&MultiIndex::new(vec![1]));
        let d2 = jets[0].derivative(&MultiIndex::new(vec![2]));
        assert!((d1 + y / phi).abs() < 1e-12);
        assert!((d2 + 1.0 / phi.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn exponential_graph_chart() {
        let sys = FunctionSystem::new(2, vec![parse("(- x2 (exp x1))").unwrap()]).unwrap();
        let chart = Chart::new(sys, vec![0], vec![1], vec![0.0, 1.0]).unwrap();
        let jets = chart.jets(&[0.7], 5).unwrap();
        for k in 0..=5 {
            let d = jets[1].derivative(&MultiIndex::new(vec![k]));
            assert!((d - 0.7f64.exp()).abs() < 1e-12);
        }
        assert_eq!(chart.delta().unwrap(), Term::one());
    }

    #[test]
    fn rejects_bad_partition() {
        let sys = FunctionSystem::new(2, vec![parse("x1").unwrap()]).unwrap();
        assert!(Chart::new(sys.clone(), vec![0], vec![0], vec![0.0, 0.0]).is_err());
        assert!(matches!(
            Chart::new(sys, vec![0], vec![1], vec![0.0, 0.0]),
            Err(ChartError::Singular(_))
        ));
    }
}

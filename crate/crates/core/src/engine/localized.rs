//! Derivatives along an implicit chart without solving for the chart.
//!
//! With solved columns `s_1, …, s_q` and free columns `y`, the chart
//! derivative of `h(y, φ(y))` in `y_j` is `T̂_j h / Δ` where
//! `T̂_j h = Δ·∂h/∂y_j + Σ_k ψ_{k,j}·∂h/∂x_{s_k}` and `ψ_{k,j}` is the
//! determinant of the solved block with column `k` replaced by the negated
//! free column `j`. A [`LocalizedTerm`] `(N, d)` stands for `N / Δ^d`.

use serde::Serialize;

use crate::jacobian::{columns, determinant, SystemError};
use crate::term::{partial, MultiIndex, Term};

use super::RegState;

#[derive(Clone, Debug)]
pub struct ChartSplit {
    /// Zero-based free columns, increasing.
    pub free: Vec<usize>,
    /// Zero-based solved columns, increasing.
    pub solved: Vec<usize>,
    pub delta: Term,
    /// `Δ` at the witness.
    pub delta_value: f64,
    /// `psi[k][j]` for solved index `k` and free index `j`.
    pub psi: Vec<Vec<Term>>,
    /// `T̂_j Δ`, one per free index.
    t_delta: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalizedTerm {
    pub numer: Term,
    pub d: u32,
}

impl ChartSplit {
    /// Builds `Δ`, `ψ` and `T̂Δ` for the given column partition.
    pub fn new(state: &RegState, free: Vec<usize>, solved: Vec<usize>, delta_value: f64) -> Result<Self, SystemError> {
        let jac = state.system.jacobian();
        let delta = determinant(&columns(jac, &solved))?;
        let psi = (0..solved.len())
            .map(|k| {
                free.iter()
                    .map(|&fj| {
                        let block: Vec<Vec<Term>> = jac
                            .iter()
                            .map(|row| {
                                solved
                                    .iter()
                                    .enumerate()
                                    .map(|(c, &col)| if c == k { -&row[fj] } else { row[col].clone() })
                                    .collect()
                            })
                            .collect();
                        determinant(&block)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut split = ChartSplit {
            free,
            solved,
            delta,
            delta_value,
            psi,
            t_delta: Vec::new(),
        };
        split.t_delta = (0..split.free.len())
            .map(|j| split.t_hat(&split.delta, j))
            .collect();
        Ok(split)
    }

    /// `T̂_j h`.
    pub fn t_hat(&self, h: &Term, j: usize) -> Term {
        let mut parts = vec![&self.delta * &partial(h, self.free[j] + 1)];
        for (k, &s) in self.solved.iter().enumerate() {
            let dh = partial(h, s + 1);
            if !dh.is_zero_term() {
                parts.push(&self.psi[k][j] * &dh);
            }
        }
        Term::sum(parts)
    }
}

/// `(Δ·T̂_j N − d·N·T̂_j Δ, d + 2)`: the quotient rule for `N/Δ^d` along
/// the chart in free direction `j`.
pub fn localized_derive(lt: &LocalizedTerm, split: &ChartSplit, j: usize) -> LocalizedTerm {
    let tn = split.t_hat(&lt.numer, j);
    let first = &split.delta * &tn;
    let numer = if lt.d == 0 {
        first
    } else {
        let second = Term::product([Term::int(lt.d as i64), lt.numer.clone(), split.t_delta[j].clone()]);
        &first - &second
    };
    LocalizedTerm { numer, d: lt.d + 2 }
}

/// `D^α` of `h` along the chart, with unit steps applied in increasing
/// free index order.
pub fn localized_alpha(h: &Term, split: &ChartSplit, alpha: &MultiIndex) -> LocalizedTerm {
    let mut lt = LocalizedTerm {
        numer: h.clone(),
        d: 0,
    };
    for (j, &k) in alpha.as_slice().iter().enumerate() {
        for _ in 0..k {
            lt = localized_derive(&lt, split, j);
        }
    }
    lt
}

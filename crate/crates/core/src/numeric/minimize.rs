//! Minimum of `H_η(x) = Σ (x_i − η_i)²` on a zero set, by projected
//! gradient descent from several starts followed by Newton polishing of
//! the Lagrange (KKT) system.

use serde::Serialize;

use super::{project, NumericError, Tolerances};
use crate::jacobian::FunctionSystem;
use crate::linalg::{gram, mat_vec, norm, norm_inf, solve, transpose, Matrix};
use crate::term::{evaluate_f64, partial, Term};

#[derive(Clone, Debug, Serialize)]
pub struct MinDistance {
    pub point: Vec<f64>,
    /// `H_η` at the point.
    pub distance_sq: f64,
    /// `max |constraint|` at the point.
    pub residual: f64,
    /// True when `h` was dropped from the constraints because it already
    /// vanishes at the minimizer over the system's zero set.
    pub pruned: bool,
    /// Index into the start list (after `η` itself, which is tried first).
    pub start: usize,
}

fn h_eta(x: &[f64], eta: &[f64]) -> f64 {
    x.iter().zip(eta).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Solves `(A Aᵀ + μI) y = b` with a tiny ridge for rank-deficient `A`.
fn ridge_gram_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let mut g = gram(a);
    let scale = g.iter().enumerate().fold(0.0f64, |m, (i, r)| m.max(r[i]));
    for (i, r) in g.iter_mut().enumerate() {
        r[i] += 1e-13 * scale.max(1e-300);
    }
    solve(&g, b)
}

/// Component of `g` tangent to the zero set at a point with Jacobian `j`.
fn tangent(j: &Matrix, g: &[f64]) -> Vec<f64> {
    if j.is_empty() {
        return g.to_vec();
    }
    let jg = mat_vec(j, g);
    match ridge_gram_solve(j, &jg) {
        Some(y) => {
            let back = mat_vec(&transpose(j), &y);
            g.iter().zip(&back).map(|(a, b)| a - b).collect()
        }
        None => g.to_vec(),
    }
}

struct Kkt {
    hess: Vec<Vec<Vec<Term>>>,
}

impl Kkt {
    fn new(cons: &FunctionSystem) -> Self {
        let n = cons.dim();
        let hess = cons
            .jacobian()
            .iter()
            .map(|row| {
                (0..n)
                    .map(|a| (0..n).map(|b| partial(&row[a], b + 1)).collect())
                    .collect()
            })
            .collect();
        Kkt { hess }
    }

    fn residual(cons: &FunctionSystem, eta: &[f64], x: &[f64], lam: &[f64]) -> Option<Vec<f64>> {
        let j = cons.jacobian_f64(x).ok()?;
        let c = cons.residuals_f64(x).ok()?;
        let jt_l = mat_vec(&transpose(&j), lam);
        let mut r: Vec<f64> = x
            .iter()
            .zip(eta)
            .zip(&jt_l)
            .map(|((a, b), l)| 2.0 * (a - b) + l)
            .collect();
        r.extend(c);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn polish(&self, cons: &FunctionSystem, eta: &[f64], x0: &[f64]) -> Vec<f64> {
        let n = cons.dim();
        let q = cons.len();
        let mut x = x0.to_vec();
        let Ok(j) = cons.jacobian_f64(&x) else {
            return x;
        };
        let g: Vec<f64> = x.iter().zip(eta).map(|(a, b)| 2.0 * (a - b)).collect();
        let Some(lam0) = ridge_gram_solve(&j, &mat_vec(&j, &g)) else {
            return x;
        };
        let mut lam: Vec<f64> = lam0.iter().map(|v| -v).collect();
        let Some(mut r) = Self::residual(cons, eta, &x, &lam) else {
            return x;
        };
        for _ in 0..30 {
            let size = norm(&r);
            if size <= 1e-14 * (1.0 + norm_inf(&x)) {
                break;
            }
            let Ok(j) = cons.jacobian_f64(&x) else { break };
            let mut k = vec![vec![0.0; n + q]; n + q];
            for a in 0..n {
                k[a][a] = 2.0;
                for b in 0..n {
                    for (i, l) in lam.iter().enumerate() {
                        k[a][b] += l * evaluate_f64(&self.hess[i][a][b], &x).unwrap_or(f64::NAN);
                    }
                }
                for i in 0..q {
                    k[a][n + i] = j[i][a];
                    k[n + i][a] = j[i][a];
                }
            }
            let Some(step) = solve(&k, &r) else { break };
            let nx: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - s).collect();
            let nl: Vec<f64> = lam.iter().zip(&step[n..]).map(|(a, s)| a - s).collect();
            match Self::residual(cons, eta, &nx, &nl) {
                Some(nr) if norm(&nr) < size => {
                    x = nx;
                    lam = nl;
                    r = nr;
                }
                _ => break,
            }
        }
        x
    }
}

fn descend(cons: &FunctionSystem, eta: &[f64], start: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = project(cons, start, tol).ok()?;
    let mut hx = h_eta(&x, eta);
    // Step length adapts: doubled after a success, so flat objectives along
    // the zero set are still crossed in few iterations.
    let mut t_last = 0.5f64;
    for _ in 0..400 {
        let j = cons.jacobian_f64(&x).ok()?;
        let g: Vec<f64> = x.iter().zip(eta).map(|(a, b)| 2.0 * (a - b)).collect();
        let pg = tangent(&j, &g);
        let size = norm(&pg);
        if size <= 1e-10 * (1.0 + hx.sqrt()) {
            break;
        }
        let mut t = (2.0 * t_last).min((1.0 + norm_inf(&x)) / size);
        let mut moved = false;
        while t * size > 1e-14 {
            let trial: Vec<f64> = x.iter().zip(&pg).map(|(a, d)| a - t * d).collect();
            if let Ok(y) = project(cons, &trial, tol) {
                let hy = h_eta(&y, eta);
                if hy < hx - 1e-4 * t * size * size {
                    x = y;
                    hx = hy;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
        t_last = t;
    }
    Some(x)
}

fn feasible(cons: &FunctionSystem, x: &[f64], tol: f64) -> Option<f64> {
    let r = norm_inf(&cons.residuals_f64(x).ok()?);
    (r <= tol).then_some(r)
}

/// Candidate minimizers from every start, each feasible within `tol_res`.
fn minimize_on(
    cons: &FunctionSystem,
    eta: &[f64],
    starts: &[Vec<f64>],
    tol: &Tolerances,
) -> Vec<(usize, Vec<f64>, f64)> {
    let kkt = Kkt::new(cons);
    let mut out = Vec::new();
    for (i, s) in starts.iter().enumerate() {
        let Some(x) = descend(cons, eta, s, tol.tol_res) else {
            continue;
        };
        let polished = kkt.polish(cons, eta, &x);
        let x = match feasible(cons, &polished, tol.tol_res) {
            Some(_) if h_eta(&polished, eta) <= h_eta(&x, eta) + 1e-9 => polished,
            _ => x,
        };
        if let Some(r) = feasible(cons, &x, tol.tol_res) {
            out.push((i, x, r));
        }
    }
    out
}

fn best(cands: Vec<(usize, Vec<f64>, f64)>, eta: &[f64]) -> Option<(usize, Vec<f64>, f64)> {
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for c in cands {
        let better = match &best {
            None => true,
            Some(b) => {
                let (hc, hb) = (h_eta(&c.1, eta), h_eta(&b.1, eta));
                hc < hb - 1e-12 * (1.0 + hb)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// Point of `{sys = 0, h = 0}` nearest to `η` among the local minima
/// reached from `η` and `starts`. `h` is first treated as redundant
/// (minimizing over `{sys = 0}` and keeping minimizers where `h` vanishes);
/// only if none qualifies is it added as a constraint. Ties within `1e-12`
/// keep the earlier start.
pub fn min_distance_point(
    sys: &FunctionSystem,
    h: &Term,
    eta: &[f64],
    starts: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<MinDistance, NumericError> {
    let mut all = vec![eta.to_vec()];
    all.extend(starts.iter().cloned());
    let h_ok = |x: &[f64]| {
        evaluate_f64(h, x)
            .map(|v| v.abs() <= tol.tol_res)
            .unwrap_or(false)
    };
    let cands: Vec<_> = minimize_on(sys, eta, &all, tol)
        .into_iter()
        .filter(|c| h_ok(&c.1))
        .collect();
    let (pruned, found) = match best(cands, eta) {
        Some(b) => (true, Some(b)),
        None => {
            let cons = sys.with_function(h.clone());
            (false, best(minimize_on(&cons, eta, &all, tol), eta))
        }
    };
    let (i, point, residual) = found.ok_or(NumericError::Infeasible)?;
    Ok(MinDistance {
        distance_sq: h_eta(&point, eta),
        point,
        residual,
        pruned,
        start: i,
    })
}

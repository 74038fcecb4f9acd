//! Regularization: from a single `f` with a zero, build `f_1, …, f_{n+m}`
//! in `n + m` variables whose regular zero set meets `V(f)`.
//!
//! The state always holds a regular witness of `p + m` functions on which
//! `f` vanishes. A stage either appends a localized derivative of the
//! target along the current chart (when the target is not flat along it),
//! or replaces the target by `Q_η² + h²` at a point of minimal distance to
//! `η` and retries.

mod localized;
mod trace;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::closure::augment;
use crate::jacobian::{grad, is_regular_at_f64, q_value_f64, q_witness, FunctionSystem, RegularityVerdict};
use crate::jet::taylor;
use crate::linalg::{combinations, det, norm_inf};
use crate::numeric::{find_zero, min_distance_point, newton_refine, project, SearchBox, Tolerances};
use crate::term::{d_alpha, evaluate_f64, MultiIndex, Term};

pub use localized::{localized_alpha, localized_derive, ChartSplit, LocalizedTerm};
pub use trace::Step;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    #[serde(flatten)]
    pub tol: Tolerances,
    /// Zero search box; a single interval applies to every axis.
    #[serde(rename = "box")]
    pub search_box: SearchBox,
    pub grid: usize,
    /// Number of `η` values per Case-2 entry; `n + m + 1` when absent.
    pub max_eta: Option<usize>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            tol: Tolerances::default(),
            search_box: SearchBox::cube(1, -2.0, 2.0),
            grid: 21,
            max_eta: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineErrorKind {
    NoZero,
    FlatToMaxOrder,
    EtaExhausted,
    NonConvergence,
    Inconsistency,
}

#[derive(Clone, Debug, Serialize, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct EngineError {
    pub kind: EngineErrorKind,
    pub message: String,
    pub trace: Vec<Step>,
}

/// Inductive state: `p + m` functions in `n + m` variables, regular at the
/// witness, with the target vanishing there.
#[derive(Clone, Debug)]
pub struct RegState {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub system: FunctionSystem,
    pub target: Term,
    pub witness: Vec<f64>,
}

impl RegState {
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn verdict(&self, tol: &Tolerances) -> Result<RegularityVerdict, crate::term::EvalError> {
        is_regular_at_f64(&self.system, &self.witness, tol.tol_res, tol.tol_reg)
    }

    /// Regular at the witness and `|f(witness)| ≤ tol_res`.
    pub fn holds(&self, tol: &Tolerances) -> bool {
        let target = evaluate_f64(&self.target, &self.witness).map(f64::abs);
        matches!(self.verdict(tol), Ok(v) if v.regular)
            && matches!(target, Ok(t) if t <= tol.tol_res)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizationResult {
    pub n: usize,
    pub m: usize,
    pub functions: Vec<Term>,
    pub witness: Vec<f64>,
    pub target_residual: f64,
    pub verdict: RegularityVerdict,
    pub trace: Vec<Step>,
}

pub enum Case1Outcome {
    Nonflat {
        alpha: MultiIndex,
        /// Free index of the extra step.
        direction: usize,
        localized: LocalizedTerm,
        /// `D^{α + e_j}` of the chart function.
        next_derivative: f64,
    },
    LocallyFlat,
}

struct Run<'a> {
    tol: &'a Tolerances,
    trace: Vec<Step>,
}

impl Run<'_> {
    fn fail(&self, kind: EngineErrorKind, message: impl Into<String>) -> EngineError {
        EngineError {
            kind,
            message: message.into(),
            trace: self.trace.clone(),
        }
    }
}

fn order_max_abs(derivs: &[(MultiIndex, f64)], order: u32) -> f64 {
    derivs
        .iter()
        .filter(|(a, _)| a.order() == order)
        .fold(0.0f64, |m, (_, d)| m.max(d.abs()))
}

/// First multi-index (graded, then ascending lexicographic) of order at
/// least 1 whose derivative exceeds `tol`.
fn first_nonflat(derivs: &[(MultiIndex, f64)], tol: f64) -> Option<(MultiIndex, f64)> {
    derivs
        .iter()
        .filter(|(a, _)| a.order() >= 1)
        .find(|(_, d)| d.abs() > tol)
        .map(|(a, d)| (a.clone(), *d))
}

/// Initial state from a zero `a` of `f`. For `f ≡ 0` this is the coordinate
/// system at the origin.
pub fn base_case(f: &Term, a: &[f64], tol: &Tolerances) -> Result<(RegState, Step), EngineError> {
    let n = a.len();
    let run = Run {
        tol,
        trace: Vec::new(),
    };
    if f.is_zero_term() {
        let state = RegState {
            n,
            m: 0,
            p: n,
            system: FunctionSystem::coordinates(n),
            target: f.clone(),
            witness: vec![0.0; n],
        };
        return Ok((state, Step::ZeroTarget { n }));
    }
    let value = evaluate_f64(f, a).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    if value.abs() > tol.tol_res {
        return Err(run.fail(
            EngineErrorKind::NoZero,
            format!("|f(a)| = {:e} exceeds tol_res", value.abs()),
        ));
    }
    let jet = taylor(f, a, tol.max_order).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    let derivs = jet.derivatives();
    // The start is only an approximate zero, so a jet entry above the
    // flatness floor may still be a vanishing derivative (a multiple root).
    // Candidates are tried in order until the projected witness is regular.
    let mut rest = &derivs[..];
    let mut first_q = None;
    while let Some((alpha_star, derivative)) = first_nonflat(rest, tol.tol_nonflat) {
        let pos = rest.iter().position(|(a, _)| *a == alpha_star).expect("present");
        rest = &rest[pos + 1..];
        let j = alpha_star.first_step().expect("order ≥ 1");
        let beta = alpha_star.minus_unit(j).expect("positive entry");
        let f1 = d_alpha(f, &beta);
        let system =
            FunctionSystem::new(n, vec![f1]).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
        let witness = project(&system, a, tol.tol_res * 1e-3).unwrap_or_else(|_| a.to_vec());
        let witness = if evaluate_f64(f, &witness).map(|v| v.abs() <= tol.tol_res).unwrap_or(false) {
            witness
        } else {
            a.to_vec()
        };
        let state = RegState {
            n,
            m: 0,
            p: 1,
            system,
            target: f.clone(),
            witness,
        };
        let q = q_value_f64(&state.system, &state.witness).unwrap_or(0.0);
        if !state.holds(tol) {
            first_q.get_or_insert((beta, q));
            continue;
        }
        let step = Step::Base {
            start: a.to_vec(),
            alpha_star,
            beta,
            derivative,
            witness: state.witness.clone(),
            q,
        };
        return Ok((state, step));
    }
    Err(match first_q {
        None => run.fail(
            EngineErrorKind::FlatToMaxOrder,
            format!("all derivatives of order ≤ {} vanish at {:?}", tol.max_order, a),
        ),
        Some((beta, q)) => run.fail(
            EngineErrorKind::Inconsistency,
            format!("base function D^{beta} f is not regular at the witness (Q = {q:e})"),
        ),
    })
}

/// Column partition maximizing `|Δ(ā)|`; ties go to the later subset, so
/// free variables take the lowest indices.
pub fn chart_split(state: &RegState, tol: &Tolerances) -> Result<ChartSplit, EngineError> {
    let fail = |message: String| EngineError {
        kind: EngineErrorKind::Inconsistency,
        message,
        trace: Vec::new(),
    };
    let n = state.dim();
    let q = state.system.len();
    let jac = state
        .system
        .jacobian_f64(&state.witness)
        .map_err(|e| fail(e.to_string()))?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for cols in combinations(n, q) {
        let sub: Vec<Vec<f64>> = jac.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let d = det(&sub);
        if best.as_ref().map_or(true, |(_, b)| d.abs() >= b.abs()) {
            best = Some((cols, d));
        }
    }
    let (solved, delta_value) = best.ok_or_else(|| fail("no column subsets".into()))?;
    if delta_value.abs() < tol.tol_reg.sqrt() {
        return Err(fail(format!(
            "largest solved minor {delta_value:e} is below the floor at {:?}",
            state.witness
        )));
    }
    let free: Vec<usize> = (0..n).filter(|c| !solved.contains(c)).collect();
    ChartSplit::new(state, free, solved, delta_value).map_err(|e| fail(e.to_string()))
}

/// Looks for the lowest order at which `h` restricted to the chart has a
/// nonvanishing derivative at the witness, and builds the localized
/// derivative one order below it.
pub fn case1_test(
    state: &RegState,
    split: &ChartSplit,
    h: &Term,
    tol: &Tolerances,
) -> Result<Case1Outcome, EngineError> {
    let fail = |kind: EngineErrorKind, message: String| EngineError {
        kind,
        message,
        trace: Vec::new(),
    };
    let value = evaluate_f64(h, &state.witness).map_err(|e| fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    if value.abs() > tol.tol_res {
        return Err(fail(
            EngineErrorKind::Inconsistency,
            format!("target does not vanish at the witness ({:e})", value.abs()),
        ));
    }
    let chart = Chart::new(
        state.system.clone(),
        split.free.clone(),
        split.solved.clone(),
        state.witness.clone(),
    )
    .map_err(|e| fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    let jet = chart
        .compose(h, &chart.base_free(), tol.max_order)
        .map_err(|e| fail(EngineErrorKind::NonConvergence, e.to_string()))?;
    let derivs = jet.derivatives();
    let check = |t: &LocalizedTerm| -> Result<f64, EngineError> {
        let v = evaluate_f64(&t.numer, &state.witness).map_err(|e| fail(EngineErrorKind::Inconsistency, e.to_string()))?;
        Ok(v / split.delta_value.powi(t.d as i32))
    };
    // Jets only screen: high-order jet entries carry rounding noise, so each
    // candidate is confirmed on the symbolic localized term.
    let mut rest = &derivs[..];
    while let Some((alpha_star, next)) = first_nonflat(rest, tol.tol_nonflat) {
        let pos = rest.iter().position(|(a, _)| *a == alpha_star).expect("present");
        rest = &rest[pos + 1..];
        let j = alpha_star.first_step().expect("order ≥ 1");
        let alpha = alpha_star.minus_unit(j).expect("positive entry");
        let lt = localized_alpha(h, split, &alpha);
        let further = localized_derive(&lt, split, j);
        let at_star = check(&further)?;
        if at_star.abs() <= tol.tol_nonflat {
            continue;
        }
        let at_alpha = check(&lt)?;
        let reference = order_max_abs(&derivs, alpha.order());
        if at_alpha.abs() > tol.tol_nonflat.max(reference) || (at_star - next).abs() > 1e-6 * next.abs().max(1.0) {
            return Err(fail(
                EngineErrorKind::Inconsistency,
                format!(
                    "localized derivative disagrees with the chart jet: D^{alpha} = {at_alpha:e}, D^{alpha_star} = {at_star:e} vs {next:e}"
                ),
            ));
        }
        return Ok(Case1Outcome::Nonflat {
            alpha,
            direction: j,
            localized: lt,
            next_derivative: at_star,
        });
    }
    Ok(Case1Outcome::LocallyFlat)
}

/// `F / 2^k` with `2^k` nearest `‖∇F(w)‖`. Localized numerators carry
/// powers of `Δ` and can be huge; the constant rescaling keeps the zero set
/// and regularity while giving residuals a unit scale.
fn normalized(f: &Term, w: &[f64], n: usize) -> Term {
    let g: f64 = grad(f, n)
        .iter()
        .map(|d| evaluate_f64(d, w).unwrap_or(f64::NAN).powi(2))
        .sum::<f64>()
        .sqrt();
    if !g.is_finite() || g == 0.0 {
        return f.clone();
    }
    let k = g.log2().round() as i32;
    if k == 0 {
        return f.clone();
    }
    let two = BigRational::from_integer(2.into());
    f.scale(&two.pow(-k))
}

/// Appends `F`, keeps `m`, and re-validates at a polished witness.
pub fn case1_extend(state: &RegState, f_new: Term, tol: &Tolerances) -> Result<RegState, EngineError> {
    let fail = |message: String| EngineError {
        kind: EngineErrorKind::Inconsistency,
        message,
        trace: Vec::new(),
    };
    let f_new = normalized(&f_new, &state.witness, state.dim());
    let value = evaluate_f64(&f_new, &state.witness).map_err(|e| fail(e.to_string()))?;
    if !(value.abs() <= tol.tol_res.max(1e-6)) {
        return Err(fail(format!("appended function is {value:e} at the witness")));
    }
    let system = state.system.with_function(f_new);
    let witness = match project(&system, &state.witness, tol.tol_res * 1e-3) {
        Ok(w) if norm_inf(&w.iter().zip(&state.witness).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-6 => w,
        _ => state.witness.clone(),
    };
    let next = RegState {
        n: state.n,
        m: state.m,
        p: state.p + 1,
        system,
        target: state.target.clone(),
        witness,
    };
    if !next.holds(tol) {
        let v = next.verdict(tol).map_err(|e| fail(e.to_string()))?;
        return Err(fail(format!(
            "not regular after appending: residual {:e}, Q {:e}",
            v.residual, v.q
        )));
    }
    Ok(next)
}

fn with_trace(mut e: EngineError, trace: &[Step]) -> EngineError {
    let mut t = trace.to_vec();
    t.append(&mut e.trace);
    e.trace = t;
    e
}

/// `H_η = Σ (x_i − η_i)²` over `n` variables.
fn h_eta(eta: &[f64]) -> Term {
    Term::sum(eta.iter().enumerate().map(|(i, &e)| {
        let c = num_rational::BigRational::from_float(e).expect("finite η");
        (&Term::var(i + 1) - &Term::constant(c)).square()
    }))
}

fn starts(witness: &[f64], count: usize) -> Vec<Vec<f64>> {
    let mut out = vec![witness.to_vec()];
    let delta = 0.5 * (1.0 + norm_inf(witness));
    'outer: for i in 0..witness.len() {
        for sign in [1.0, -1.0] {
            if out.len() >= count {
                break 'outer;
            }
            let mut x = witness.to_vec();
            x[i] += sign * delta;
            out.push(x);
        }
    }
    out
}

fn run_case1(run: &mut Run, state: &RegState, split: &ChartSplit, h: &Term) -> Result<Option<RegState>, EngineError> {
    let out = case1_test(state, split, h, run.tol).map_err(|e| with_trace(e, &run.trace))?;
    match out {
        Case1Outcome::LocallyFlat => Ok(None),
        Case1Outcome::Nonflat {
            alpha,
            direction,
            localized,
            next_derivative,
        } => {
            let order = alpha.order();
            let d = localized.d;
            let next = case1_extend(state, localized.numer, run.tol).map_err(|e| with_trace(e, &run.trace))?;
            let v = next.verdict(run.tol).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
            run.trace.push(Step::Case1 {
                p: state.p,
                alpha,
                direction,
                order,
                d,
                next_derivative,
                index: next.system.len(),
                witness: next.witness.clone(),
                residual: v.residual,
                q: v.q,
            });
            Ok(Some(next))
        }
    }
}

fn augmented(run: &mut Run, state: &RegState) -> Result<RegState, EngineError> {
    let sys = augment(&state.system).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    let q = q_value_f64(&state.system, &state.witness).map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    let mut witness = state.witness.clone();
    witness.push(1.0 / q);
    let next = RegState {
        n: state.n,
        m: state.m + 1,
        p: state.p,
        system: sys,
        target: state.target.clone(),
        witness,
    };
    let q_next = q_value_f64(&next.system, &next.witness).unwrap_or(0.0);
    run.trace.push(Step::Augment {
        m: next.m,
        witness: next.witness.clone(),
        q: q_next,
    });
    if !next.holds(run.tol) {
        return Err(run.fail(EngineErrorKind::Inconsistency, "augmented state is not regular"));
    }
    Ok(next)
}

fn case2(run: &mut Run, state: &RegState, max_eta: Option<usize>) -> Result<RegState, EngineError> {
    let mut state = state.clone();
    let mut did_augment = false;
    'restart: loop {
        let n = state.dim();
        let scale = 2.0 * (1.0 + norm_inf(&state.witness));
        run.trace.push(Step::Case2Entry {
            p: state.p,
            m: state.m,
            scale,
        });
        let mut h = state.target.clone();
        let count = max_eta.unwrap_or(n + 1);
        for i in 0..count {
            let mut eta = vec![0.0; n];
            if i > 0 {
                eta[(i - 1) % n] = scale * (1 + (i - 1) / n) as f64;
            }
            let md = min_distance_point(
                &state.system,
                &h,
                &eta,
                &starts(&state.witness, run.tol.multistart),
                run.tol,
            )
            .map_err(|e| run.fail(EngineErrorKind::NonConvergence, e.to_string()))?;
            let b = md.point.clone();
            let q_b = q_value_f64(&state.system, &b).unwrap_or(0.0);
            if !(q_b >= run.tol.tol_reg) {
                if did_augment {
                    return Err(run.fail(
                        EngineErrorKind::Inconsistency,
                        format!("minimizer {b:?} is singular after augmentation"),
                    ));
                }
                did_augment = true;
                state = augmented(run, &state)?;
                continue 'restart;
            }
            let base = if md.pruned {
                state.system.clone()
            } else {
                state.system.with_function(h.clone())
            };
            let q_eta = q_witness(&base.with_function(h_eta(&eta)))
                .map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
            let f_tilde = &q_eta.square() + &h.square();
            let at_b = RegState {
                witness: b.clone(),
                ..state.clone()
            };
            let q_eta_b = evaluate_f64(&q_eta, &b).unwrap_or(f64::NAN);
            let target_b = evaluate_f64(&f_tilde, &b).unwrap_or(f64::NAN);
            let outcome = if at_b.holds(run.tol) {
                let split = chart_split(&at_b, run.tol).map_err(|e| with_trace(e, &run.trace))?;
                run.trace.push(Step::Chart {
                    p: at_b.p,
                    free: split.free.clone(),
                    solved: split.solved.clone(),
                    delta: split.delta_value,
                });
                let mut probe = Run {
                    tol: run.tol,
                    trace: Vec::new(),
                };
                let result = run_case1(&mut probe, &at_b, &split, &f_tilde).map_err(|e| with_trace(e, &run.trace))?;
                Some((result, probe.trace))
            } else {
                None
            };
            let nonflat = matches!(outcome, Some((Some(_), _)));
            run.trace.push(Step::Eta {
                index: i + 1,
                eta: eta.clone(),
                point: b.clone(),
                pruned: md.pruned,
                distance_sq: md.distance_sq,
                q_eta: q_eta_b,
                target: target_b,
                nonflat,
            });
            match outcome {
                Some((Some(next), steps)) => {
                    run.trace.extend(steps);
                    return Ok(next);
                }
                Some((None, _)) => {
                    run.trace.push(Step::LocallyFlat {
                        p: at_b.p,
                        max_order: run.tol.max_order,
                    });
                    h = f_tilde;
                    state = at_b;
                }
                None => {
                    return Err(run.fail(
                        EngineErrorKind::Inconsistency,
                        format!("target does not vanish at the minimizer {b:?}"),
                    ))
                }
            }
        }
        return Err(run.fail(
            EngineErrorKind::EtaExhausted,
            format!("no η among {count} gave a nonflat target"),
        ));
    }
}

/// Runs the stages from an initial state until `p = n`.
pub fn regularize_from(state: RegState, first: Step, options: &EngineOptions) -> Result<RegularizationResult, EngineError> {
    let tol = &options.tol;
    let mut run = Run {
        tol,
        trace: vec![first],
    };
    let mut state = state;
    while state.p < state.n {
        let split = chart_split(&state, tol).map_err(|e| with_trace(e, &run.trace))?;
        run.trace.push(Step::Chart {
            p: state.p,
            free: split.free.clone(),
            solved: split.solved.clone(),
            delta: split.delta_value,
        });
        let target = state.target.clone();
        state = match run_case1(&mut run, &state, &split, &target)? {
            Some(next) => next,
            None => {
                run.trace.push(Step::LocallyFlat {
                    p: state.p,
                    max_order: tol.max_order,
                });
                case2(&mut run, &state, options.max_eta)?
            }
        };
    }
    if state.system.len() == state.dim() && state.n > 0 && !state.target.is_zero_term() {
        if let Ok(r) = newton_refine(&state.system, &state.witness, 20, tol.tol_res * 1e-4) {
            let moved = norm_inf(&r.point.iter().zip(&state.witness).map(|(a, b)| a - b).collect::<Vec<_>>());
            let candidate = RegState {
                witness: r.point.clone(),
                ..state.clone()
            };
            if moved < 1e-6 && candidate.holds(tol) {
                run.trace.push(Step::Refine {
                    iterations: r.iterations,
                    residual: r.residual,
                    moved,
                });
                state = candidate;
            }
        }
    }
    let verdict = state
        .verdict(tol)
        .map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?;
    let target_residual = evaluate_f64(&state.target, &state.witness)
        .map_err(|e| run.fail(EngineErrorKind::Inconsistency, e.to_string()))?
        .abs();
    if !verdict.regular || target_residual > tol.tol_res {
        return Err(run.fail(
            EngineErrorKind::Inconsistency,
            format!(
                "final state fails: residual {:e}, Q {:e}, |f| {target_residual:e}",
                verdict.residual, verdict.q
            ),
        ));
    }
    Ok(RegularizationResult {
        n: state.n,
        m: state.m,
        functions: state.system.functions().to_vec(),
        witness: state.witness,
        target_residual,
        verdict,
        trace: run.trace,
    })
}

/// Finds a zero of `f` in the option box (the one nearest the origin, ties
/// broken lexicographically) and regularizes from it.
pub fn regularize(f: &Term, n: usize, options: &EngineOptions) -> Result<RegularizationResult, EngineError> {
    let tol = &options.tol;
    let start = if f.is_zero_term() {
        vec![0.0; n]
    } else {
        let zeros = find_zero(f, &options.search_box.resized(n), options.grid, tol.tol_res);
        let best = zeros.into_iter().min_by(|a, b| {
            let (na, nb) = (norm_inf(a), norm_inf(b));
            na.total_cmp(&nb).then_with(|| crate::numeric::lex_cmp(a, b))
        });
        match best {
            Some(z) => z,
            None => {
                return Err(EngineError {
                    kind: EngineErrorKind::NoZero,
                    message: "no zero found in the search box".into(),
                    trace: Vec::new(),
                })
            }
        }
    };
    let (state, first) = base_case(f, &start, tol)?;
    regularize_from(state, first, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    #[test]
    fn zero_target() {
        let r = regularize(&Term::zero(), 2, &EngineOptions::default()).unwrap();
        assert_eq!(r.m, 0);
        assert_eq!(r.functions, vec![Term::var(1), Term::var(2)]);
        assert_eq!(r.witness, vec![0.0, 0.0]);
    }

    #[test]
    fn base_case_examples() {
        let tol = Tolerances::default();
        let f = parse("(- x2 (exp x1))").unwrap();
        let (s, _) = base_case(&f, &[0.0, 1.0], &tol).unwrap();
        assert_eq!(s.system.functions()[0], f);
        let g = f.square();
        let (s, step) = base_case(&g, &[0.0, 1.0], &tol).unwrap();
        assert_eq!(s.system.functions()[0], parse("(* 2 (- x2 (exp x1)))").unwrap());
        match step {
            Step::Base { alpha_star, beta, .. } => {
                assert_eq!(alpha_star, MultiIndex::new(vec![0, 2]));
                assert_eq!(beta, MultiIndex::new(vec![0, 1]));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn chart_split_examples() {
        let tol = Tolerances::default();
        let f = parse("(- x2 (exp x1))").unwrap();
        let (s, _) = base_case(&f, &[0.0, 1.0], &tol).unwrap();
        let split = chart_split(&s, &tol).unwrap();
        assert_eq!(split.solved, vec![1]);
        assert_eq!(split.delta, Term::one());
        assert_eq!(split.psi[0][0], parse("(exp x1)").unwrap());
        let lt = localized_derive(
            &LocalizedTerm {
                numer: Term::var(2),
                d: 0,
            },
            &split,
            0,
        );
        assert_eq!(lt.numer, parse("(exp x1)").unwrap());
        assert_eq!(lt.d, 2);
        let c = localized_derive(
            &LocalizedTerm {
                numer: Term::int(3),
                d: 0,
            },
            &split,
            0,
        );
        assert!(c.numer.is_zero_term());

        let circle = parse("(+ (^ x1 2) (^ x2 2) -1)").unwrap();
        let (s, _) = base_case(&circle, &[1.0, 0.0], &tol).unwrap();
        let split = chart_split(&s, &tol).unwrap();
        assert_eq!(split.solved, vec![0]);
        assert_eq!(split.delta, parse("(* 2 x1)").unwrap());
    }

    #[test]
    fn flat_target_along_its_own_curve() {
        let tol = Tolerances::default();
        let f = parse("(^ (- x2 (exp x1)) 2)").unwrap();
        let (s, _) = base_case(&f, &[0.0, 1.0], &tol).unwrap();
        let split = chart_split(&s, &tol).unwrap();
        assert!(matches!(
            case1_test(&s, &split, &f, &tol).unwrap(),
            Case1Outcome::LocallyFlat
        ));
    }

    #[test]
    fn circle_end_to_end() {
        let f = parse("(+ (^ x1 2) (^ x2 2) -1)").unwrap();
        let r = regularize(&f, 2, &EngineOptions::default()).unwrap();
        assert_eq!(r.functions.len(), 2);
        assert_eq!(r.m, 0);
        assert!((r.witness[0].abs() - 1.0).abs() < 1e-8 && r.witness[1].abs() < 1e-8, "{:?}", r.witness);
        assert!(r.verdict.regular);
    }

    #[test]
    fn exponential_curve_end_to_end() {
        let f = parse("(- x2 (exp x1))").unwrap();
        let r = regularize(&f, 2, &EngineOptions::default()).unwrap();
        assert_eq!(r.functions.len(), 2);
        let eta0 = r
            .trace
            .iter()
            .find_map(|s| match s {
                Step::Eta { index: 1, point, .. } => Some(point.clone()),
                _ => None,
            })
            .unwrap();
        assert!((eta0[0] + 0.42630).abs() < 1e-5 && (eta0[1] - 0.65291).abs() < 1e-5);
        assert!(r.verdict.regular);
    }
}

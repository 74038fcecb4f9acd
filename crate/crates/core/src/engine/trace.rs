//! Step records of a regularization run.

use serde::Serialize;

use crate::term::MultiIndex;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    /// `f ≡ 0`: the coordinate system at the origin.
    ZeroTarget { n: usize },
    /// First function `D^β f`.
    Base {
        start: Vec<f64>,
        alpha_star: MultiIndex,
        beta: MultiIndex,
        derivative: f64,
        witness: Vec<f64>,
        q: f64,
    },
    /// Column partition chosen at stage `p`.
    Chart {
        p: usize,
        free: Vec<usize>,
        solved: Vec<usize>,
        delta: f64,
    },
    /// No nonvanishing chart derivative up to `max_order`.
    LocallyFlat { p: usize, max_order: u32 },
    /// A localized derivative appended as function `index` (1-based).
    Case1 {
        p: usize,
        alpha: MultiIndex,
        direction: usize,
        order: u32,
        d: u32,
        next_derivative: f64,
        index: usize,
        witness: Vec<f64>,
        residual: f64,
        q: f64,
    },
    Case2Entry { p: usize, m: usize, scale: f64 },
    /// One minimum-distance point.
    Eta {
        index: usize,
        eta: Vec<f64>,
        point: Vec<f64>,
        pruned: bool,
        distance_sq: f64,
        q_eta: f64,
        target: f64,
        nonflat: bool,
    },
    /// `x_{n+m+1}·Q − 1` appended; `m` is the new slack.
    Augment {
        m: usize,
        witness: Vec<f64>,
        q: f64,
    },
    Refine {
        iterations: usize,
        residual: f64,
        moved: f64,
    },
}

//! Symbolic and numeric toolkit for regular zero sets of smooth function
//! systems.
//!
//! * [`term`]: immutable terms over `x1, x2, …`, rational constants and
//!   registered basics (`exp` ships), with partial differentiation and
//!   exact/float evaluation.
//! * [`jacobian`]: gradients, Jacobians, the sum-of-squared-minors
//!   regularity witness and pointwise regularity verdicts.
//! * [`closure`]: the one-variable augmentation `x_{n+1}·Q − 1` that turns
//!   the regular locus into a full zero set.
//! * [`engine`]: the inductive regularization procedure producing, from a
//!   single `f` with a zero, a square regular system meeting `V(f)`.
//! * [`chart`]: implicit-function charts, their points and Taylor jets.
//! * [`numeric`]: zero finding, Newton refinement, constrained minimum
//!   distance, numeric rank and flatness probes.
//! * [`control`]: derivative growth certificates and their propagation
//!   through algebra and implicit charts.

pub mod chart;
pub mod cli;
pub mod closure;
pub mod control;
pub mod engine;
pub mod jacobian;
pub mod jet;
pub mod linalg;
pub mod numeric;
pub mod scalar;
pub mod term;

pub use jacobian::FunctionSystem;
pub use scalar::Scalar;
pub use term::{parse, MultiIndex, Term};

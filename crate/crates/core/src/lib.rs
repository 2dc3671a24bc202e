//! Threshold signal detection: classical Gaussian signals `w(t)·φ` observed
//! through threshold detectors.
//!
//! Click frequencies of the detectors reproduce `ρ_ii = b_ii / Tr B`, and the
//! coincidence coefficient `g²(0)` is bounded by `3ε²(1 + |ρ_ij|²/(ρ_ii ρ_jj))`,
//! which falls as the inverse square of the threshold.
//!
//! - [`linalg`]: covariance and density matrices, Cholesky, projectors.
//! - [`gaussian`]: signal sampling and exact quadratic/quartic moments.
//! - [`wiener`]: discretized paths and per-channel first passage.
//! - [`detection`]: renewal cycles, click ledgers, empirical probabilities.
//! - [`harness`]: Born-rule, basis-invariance, `g²(0)` and sweep experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod stats;
pub mod wiener;

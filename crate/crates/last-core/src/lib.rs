//! Core library for the large average subtensor problem.
//!
//! Given an order-`p` tensor `A` with `N^p` i.i.d. standard normal entries,
//! the problem asks for `p` subsets `I_1, …, I_p ⊂ {1, …, N}` of size `k`
//! maximizing the subtensor average
//!
//! ```text
//! M(I_1, …, I_p) = k^{-p} · Σ_{i_1 ∈ I_1} … Σ_{i_p ∈ I_p} A[i_1, …, i_p].
//! ```
//!
//! The benchmark scale for the maximum is
//! `E_max = sqrt((2p / k^p) · ln C(N, k))`, the first-moment prediction for
//! the optimum; solver quality is reported as the ratio of the achieved
//! average to `E_max`.
//!
//! # Modules
//!
//! - [`rng`] — counter-based deterministic random numbers: every tensor
//!   entry and every sampling decision is a pure function of
//!   `(seed, tag, indices)`, so all results reproduce exactly across runs
//!   and thread counts.
//! - [`rtensor`] — tensor instances (dense or implicit backend),
//!   interpolated families `cos(τ)·A⁰ + sin(τ)·Aˡ`, multi-index solutions,
//!   subtensor sums, and overlap vectors.
//! - [`theory`] — closed-form reference quantities: `E_max`, Gaussian and
//!   multivariate tail bounds, counting bounds, the structured covariance
//!   model for overlap-constrained tuples and its spectral checks, and the
//!   free-energy-style exponent `Ψ` that drives the second-moment argument.
//! - [`algorithms`] — the greedy one-axis-at-a-time solver with its exact
//!   per-step maxima decomposition, exhaustive enumeration over all
//!   `C(N,k)^p` multi-indexes, and coordinate local search.
//! - [`experiments`] — deterministic Monte-Carlo drivers that sweep seeds
//!   and parameter grids, emitting CSV records plus JSON summaries that are
//!   byte-identical at any thread count.
//!
//! # Conventions
//!
//! Indices are 1-based everywhere in the public API (`1 ≤ i ≤ N`), matching
//! the mathematical notation; subsets are strictly increasing. All
//! quantities are plain `f64`; natural logarithms unless a name says
//! otherwise (`log2`).

// Domain guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: they must reject NaN inputs, which the un-negated forms
// (`x <= 0.0`) silently admit.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod rtensor;
pub mod theory;

pub use error::{Error, Result};

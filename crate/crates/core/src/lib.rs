//! steinpair: exact pair couplings and numerically certified Stein's-method
//! bounds for normal and Poisson approximation.
//!
//! A pair (W, W') with equal marginals is represented as an exact finite
//! joint distribution, the single source of truth for every expectation in
//! the bound and identity machinery:
//!
//! * [`coupling`] — the joint law of (W, W'), regression decompositions
//!   E[W'|W] = (1-λ)W + R, and jump kernels P_i(w) = P[W'-W = i | W = w].
//! * [`stein_normal`] — the smoothed half-line Stein equation
//!   f'(x) - x f(x) = h_t(x) - E h_t(Z), its bounded solution, the
//!   antiderivative G, and the equal-marginal identity checks.
//! * [`stein_poisson`] — solutions of λf(j+1) - jf(j) = I[j∈A] - Po(λ){A},
//!   the discrete antiderivative, and telescoping checks.
//! * [`bounds`] — the normal and Poisson bound evaluations, the exact
//!   suprema over Stein solutions, and distance-vs-bound reports.
//! * [`models`] — desk-scale couplings (resampled sign sums, birth–death
//!   chains, permutation fixed points, biased cycles) that exercise every
//!   path: exchangeable, merely equal-marginal, jumps beyond ±1, and R ≠ 0.
//! * [`pipeline`] — the experiment runner behind the `steinpair` CLI and the
//!   C API: configuration, report assembly, and the full verification suite.
//!
//! All computations are enumeration-exact over the finite joint; nothing is
//! sampled. Expectations in an auxiliary uniform variable are evaluated by
//! fixed Gauss–Legendre quadrature from [`numerics`].

pub mod bounds;
pub mod coupling;
mod error;
pub mod models;
pub mod numerics;
pub mod pipeline;
pub mod report;
pub mod stein_normal;
pub mod stein_poisson;

pub use error::{Error, Result};
